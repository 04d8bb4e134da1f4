#pragma once

#include <regex>
#include <string>
#include <vector>

// Line classifier written from the G-code grammar with regexes, independent
// of the library parser.
namespace fingerfab::testing {

enum class LineClass { keep, bare_homing, leveling };

inline LineClass classify(std::string line) {
  if (auto semi = line.find(';'); semi != std::string::npos) line.resize(semi);
  if (auto star = line.find('*'); star != std::string::npos) line.resize(star);
  for (auto& c : line) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  static const std::regex word_re(R"(^\s*(?:N\d+\s*)?([GM]\d+(?:\.\d+)?)\b(.*)$)");
  std::smatch m;
  if (!std::regex_match(line, m, word_re)) return LineClass::keep;
  const std::string word = m[1];
  const std::string rest = m[2];
  static const std::regex axis_re(R"((^|\s)[XYZ])");
  if (word == "G28") return std::regex_search(rest, axis_re) ? LineClass::keep : LineClass::bare_homing;
  if (word == "G29") return LineClass::leveling;
  if (word == "M420") {
    static const std::regex s_re(R"((?:^|\s)S\s*([-+]?[0-9.]+))");
    std::smatch s;
    if (std::regex_search(rest, s, s_re) && std::stod(s[1]) != 0.0) return LineClass::leveling;
  }
  return LineClass::keep;
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace fingerfab::testing
