#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <fingerfab/config.hpp>
#include <fingerfab/experiment.hpp>
#include <fingerfab/production.hpp>

namespace fingerfab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

struct RunAllOutput {
  std::string events_jsonl;
  std::string records_json;
  std::string report;
};

/// `run-all` without touching the file system: in-process mock printers on a
/// shared virtual clock, one finger pair per campaign finger type, then the
/// campaign on the produced fingers.
RunAllOutput run_all(const CliConfig& cfg, std::uint64_t seed);

std::string records_to_json(const std::vector<FingerRecord>& records);

}  // namespace fingerfab::cli
