#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fingerfab {

struct GcodeArg {
  char letter;        // upper-case
  std::string value;  // may be empty ("X" in "G28 X")

  std::optional<double> number() const;
  bool operator==(const GcodeArg&) const = default;
};

struct GcodeCommand {
  std::string word;  // upper-case, e.g. "G28", "M420", "G38.2"
  std::vector<GcodeArg> args;
  std::string comment;  // text after ';' including the ';', empty if none

  const GcodeArg* find(char letter) const;
  bool has(char letter) const { return find(letter) != nullptr; }
};

struct GcodeLine {
  std::string text;  // without terminator
  std::string eol;   // "\n", "\r\n" or "" (last line without newline)
  std::optional<GcodeCommand> command;
};

struct GcodeDocument {
  std::vector<GcodeLine> lines;

  std::string serialize() const;
};

/// Total parser: every line is kept; lines that look like commands also get
/// a parsed form.
GcodeDocument parse_gcode(std::string_view text);

GcodeLine make_line(std::string text, std::string eol = "\n");

struct SafetyRules {
  // Lines that replace each bare G28 (one without X/Y/Z).
  std::vector<std::string> homing_replacement{"G28 X Y"};
  bool remove_g29 = true;
  bool remove_m420_enable = true;
};

struct EditReport {
  int homing_lines_modified = 0;
  int leveling_lines_removed = 0;
  int post_print_lines_appended = 0;

  bool operator==(const EditReport&) const = default;
};

struct EditResult {
  GcodeDocument document;
  EditReport report;
};

bool is_bare_homing(const GcodeLine& line);
bool is_leveling_enable(const GcodeLine& line);  // G29 or M420 with S != 0

/// Throws std::invalid_argument if the replacement itself contains a bare G28.
EditResult apply_safety_edits(const GcodeDocument& doc, const SafetyRules& rules = {});

GcodeDocument append_post_print(const GcodeDocument& doc, const std::vector<std::string>& commands,
                                EditReport* report = nullptr);

}  // namespace fingerfab
