#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <fingerfab/cell.hpp>
#include <fingerfab/experiment.hpp>
#include <fingerfab/gcode.hpp>
#include <fingerfab/print_protocol.hpp>
#include <fingerfab/production.hpp>
#include <fingerfab/robot.hpp>
#include <fingerfab/slicer.hpp>

namespace fingerfab {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PrinterConfig {
  std::string id;
  Actor actor = Actor::printer_A;
  // Empty base_url: an in-process mock server is started from `mock`.
  std::string base_url;
  MockPrinterConfig mock;
  double poll_interval = 5.0;
};

struct DesignConfig {
  std::filesystem::path stl;  // resolved against the config directory
  std::string object;
};

struct CampaignConfig {
  int trials = 10;
  std::vector<ObjectKind> finger_types{std::begin(kAllObjects), std::end(kAllObjects)};
  bool fresh_pairs = false;
  bool parallel = false;
  Vec3 offset_sign = Vec3::Ones();
};

struct ReportConfig {
  std::filesystem::path events = "events.jsonl";
  std::filesystem::path records = "records.json";
  std::filesystem::path campaign = "report.csv";
  ReportFormat format = ReportFormat::csv;
};

struct CliConfig {
  std::vector<PrinterConfig> printers;
  std::string api_key;
  std::vector<Magazine> magazines;
  PairAssignment assignment;
  std::map<std::string, DesignConfig> designs;
  int print_retries = 0;
  double print_timeout = 24 * 3600.0;

  SliceConfig slice;
  SafetyRules safety;
  double b_x = 40.0;
  double b_y = 20.0;
  std::map<std::string, Vec3> rotations_deg;  // per design id

  FailureModel failure_model;
  CampaignConfig campaign;
  ReportConfig report;
  std::filesystem::path base_dir;
};

/// Strict: unknown keys and wrong types raise ConfigError naming the JSON path.
CliConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
CliConfig load_config(const std::filesystem::path& path);

/// Reads every design STL and applies its configured rotation.
std::map<std::string, DesignSpec> load_designs(const CliConfig& cfg);

std::string api_key_from_env(const CliConfig& cfg);

inline constexpr const char* kApiKeyEnv = "FINGERFAB_API_KEY";

}  // namespace fingerfab
