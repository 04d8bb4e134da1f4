#include <fingerfab/gcode.hpp>

#include <cctype>
#include <charconv>
#include <stdexcept>

namespace fingerfab {
namespace {

bool is_blank(char c) { return c == ' ' || c == '\t'; }

bool is_value_char(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+';
}

char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

std::optional<GcodeCommand> parse_command(std::string_view text) {
  std::size_t i = 0;
  const auto n = text.size();
  auto skip_blank = [&] {
    while (i < n && is_blank(text[i])) ++i;
  };

  skip_blank();
  // Optional line number, e.g. "N42 G28*17".
  if (i < n && upper(text[i]) == 'N' && i + 1 < n &&
      std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
    ++i;
    while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    skip_blank();
  }
  if (i >= n) return std::nullopt;
  const char letter = upper(text[i]);
  if (letter != 'G' && letter != 'M' && letter != 'T') return std::nullopt;
  if (i + 1 >= n || !std::isdigit(static_cast<unsigned char>(text[i + 1]))) return std::nullopt;

  GcodeCommand cmd;
  cmd.word.push_back(letter);
  ++i;
  while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) cmd.word.push_back(text[i++]);
  if (i + 1 < n && text[i] == '.' && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
    cmd.word.push_back(text[i++]);
    while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) cmd.word.push_back(text[i++]);
  }
  // The word must end at a separator, otherwise this is not a command line.
  if (i < n && !is_blank(text[i]) && text[i] != ';' && text[i] != '*' &&
      !std::isalpha(static_cast<unsigned char>(text[i]))) {
    return std::nullopt;
  }

  while (i < n) {
    skip_blank();
    if (i >= n) break;
    const char c = text[i];
    if (c == ';') {
      cmd.comment = std::string(text.substr(i));
      break;
    }
    if (c == '*') break;  // checksum
    if (!std::isalpha(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    GcodeArg arg{upper(c), {}};
    ++i;
    while (i < n && is_value_char(text[i])) arg.value.push_back(text[i++]);
    cmd.args.push_back(std::move(arg));
  }
  return cmd;
}

std::string strip_trailing_blank(std::string s) {
  while (!s.empty() && is_blank(s.back())) s.pop_back();
  return s;
}

void normalize_line_endings(GcodeDocument& doc) {
  for (auto& line : doc.lines) {
    if (line.eol == "\r\n") line.eol = "\n";
  }
}

}  // namespace

std::optional<double> GcodeArg::number() const {
  if (value.empty()) return std::nullopt;
  const char* first = value.data();
  const char* last = first + value.size();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return v;
}

const GcodeArg* GcodeCommand::find(char letter) const {
  for (const auto& a : args) {
    if (a.letter == letter) return &a;
  }
  return nullptr;
}

std::string GcodeDocument::serialize() const {
  std::string out;
  for (const auto& line : lines) {
    out += line.text;
    out += line.eol;
  }
  return out;
}

GcodeLine make_line(std::string text, std::string eol) {
  GcodeLine line{std::move(text), std::move(eol), std::nullopt};
  line.command = parse_command(line.text);
  return line;
}

GcodeDocument parse_gcode(std::string_view text) {
  GcodeDocument doc;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view body;
    std::string eol;
    if (nl == std::string_view::npos) {
      body = text.substr(pos);
      pos = text.size();
    } else {
      body = text.substr(pos, nl - pos);
      eol = "\n";
      pos = nl + 1;
      if (!body.empty() && body.back() == '\r') {
        body.remove_suffix(1);
        eol = "\r\n";
      }
    }
    doc.lines.push_back(make_line(std::string(body), std::move(eol)));
  }
  return doc;
}

bool is_bare_homing(const GcodeLine& line) {
  if (!line.command || line.command->word != "G28") return false;
  const auto& cmd = *line.command;
  return !cmd.has('X') && !cmd.has('Y') && !cmd.has('Z');
}

namespace {

bool is_g29(const GcodeLine& line) { return line.command && line.command->word == "G29"; }

bool is_m420_enable(const GcodeLine& line) {
  if (!line.command || line.command->word != "M420") return false;
  const auto* s = line.command->find('S');
  if (!s) return false;
  const auto v = s->number();
  return v && *v != 0.0;
}

}  // namespace

bool is_leveling_enable(const GcodeLine& line) { return is_g29(line) || is_m420_enable(line); }

EditResult apply_safety_edits(const GcodeDocument& doc, const SafetyRules& rules) {
  for (const auto& r : rules.homing_replacement) {
    if (is_bare_homing(make_line(r))) {
      throw std::invalid_argument("homing replacement '" + r + "' is itself a bare G28");
    }
  }

  EditResult result;
  auto& out = result.document.lines;
  out.reserve(doc.lines.size());
  for (const auto& line : doc.lines) {
    if (is_bare_homing(line)) {
      ++result.report.homing_lines_modified;
      const auto& comment = line.command->comment;
      for (std::size_t i = 0; i < rules.homing_replacement.size(); ++i) {
        std::string text = rules.homing_replacement[i];
        if (i == 0 && !comment.empty()) text = strip_trailing_blank(text) + " " + comment;
        const bool last = i + 1 == rules.homing_replacement.size();
        out.push_back(make_line(std::move(text), last ? line.eol : std::string("\n")));
      }
      continue;
    }
    if ((rules.remove_g29 && is_g29(line)) || (rules.remove_m420_enable && is_m420_enable(line))) {
      ++result.report.leveling_lines_removed;
      continue;
    }
    out.push_back(line);
  }
  if (result.report.homing_lines_modified + result.report.leveling_lines_removed > 0) {
    normalize_line_endings(result.document);
  }
  return result;
}

GcodeDocument append_post_print(const GcodeDocument& doc, const std::vector<std::string>& commands,
                                EditReport* report) {
  GcodeDocument out = doc;
  if (commands.empty()) return out;
  normalize_line_endings(out);
  if (!out.lines.empty() && out.lines.back().eol.empty()) out.lines.back().eol = "\n";
  for (const auto& c : commands) out.lines.push_back(make_line(c, "\n"));
  if (report) report->post_print_lines_appended += static_cast<int>(commands.size());
  return out;
}

}  // namespace fingerfab
