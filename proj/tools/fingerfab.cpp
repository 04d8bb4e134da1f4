#include <fingerfab/cli.hpp>

int main(int argc, char** argv) { return fingerfab::cli::run(argc, argv); }
