#include <gtest/gtest.h>

#include <json.hpp>

#include <fingerfab/cli.hpp>
#include <fingerfab/config.hpp>
#include <fingerfab/stl.hpp>

#include "support.hpp"

using namespace fingerfab;
using fingerfab::testing::scratch_dir;
using fingerfab::testing::slurp;
using fingerfab::testing::source_dir;

namespace {

std::string sample_config() { return (source_dir() / "data" / "cell.json").string(); }

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, SampleConfigLoads) {
  const auto cfg = load_config(sample_config());
  EXPECT_EQ(cfg.printers.size(), 2u);
  EXPECT_EQ(cfg.magazines.size(), 3u);
  EXPECT_EQ(cfg.designs.size(), 3u);
  EXPECT_EQ(cfg.designs.at("ethernet").object, "ethernet_cable");
  EXPECT_DOUBLE_EQ(cfg.printers[0].mock.durations.at("ethernet"), 676.0);
  EXPECT_EQ(cfg.campaign.trials, 10);
  EXPECT_EQ(cfg.failure_model.skill_duration.at(SkillKind::move_to), 3.0);
  const auto designs = load_designs(cfg);
  for (const auto& [id, d] : designs) {
    const auto placed = place_on_base(rotate_mesh(d.mesh, d.rotation), PlacementBox(cfg.b_x, cfg.b_y));
    EXPECT_FALSE(placed.triangles.empty()) << id;
  }
}

TEST(Config, UnknownKeysAreRejectedWithPath) {
  EXPECT_NE(config_error(R"({"cel": {}})").find("cel: unknown key"), std::string::npos);
  EXPECT_NE(config_error(R"({"cell": {"printers": [{"id": "printer_A", "mokc": {}}]}})").find("cell.printers[0].mokc"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"failure_model": {"envelopes": {"key": {"position": [1,2,3]}}}})")
                .find("failure_model.envelopes.key.position"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"slice": {"layer_height": "thin"}})").find("slice.layer_height"), std::string::npos);
  EXPECT_NE(config_error(R"({"failure_model": {"skill_success": {"fly": 1}}})").find("skill_success.fly"),
            std::string::npos);
  EXPECT_NE(config_error("{not json").find("invalid JSON"), std::string::npos);
  EXPECT_NE(config_error(R"({"placement": {"b_y": 0}})").find("placement"), std::string::npos);
  EXPECT_EQ(config_error("{}"), "");
}

TEST(Cli, NoArgumentsIsUsageError) {
  EXPECT_EQ(cli::run({"fingerfab"}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"fingerfab", "frobnicate"}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"fingerfab", "transform-stl", "--bogus"}), cli::kExitUsage);
  EXPECT_EQ(cli::run({"fingerfab", "--help"}), cli::kExitOk);
}

TEST(Cli, TransformStlSatisfiesPlacement) {
  const auto dir = scratch_dir("cli-transform");
  const auto in = (source_dir() / "data" / "key_fingertip.stl").string();
  const auto out = (dir / "out.stl").string();
  ASSERT_EQ(cli::run({"fingerfab", "transform-stl", in, "--by", "20", "--rot", "0,90,0", "--out", out}), 0);
  const auto placed = read_stl_file(out);
  const auto bb = fingerfab::testing::brute_force_bbox(placed);
  EXPECT_NEAR((bb.min.x() + bb.max.x()) / 2, 0.0, 1e-4);
  EXPECT_NEAR(bb.max.y(), 10.0, 1e-4);
  EXPECT_NEAR(bb.min.z(), 0.0, 1e-4);
  // Without the rotation the 30 mm long axis does not fit 20 mm in y.
  EXPECT_EQ(cli::run({"fingerfab", "transform-stl", in, "--by", "20", "--rot", "90,0,0", "--out", out}),
            cli::kExitDomain);
  EXPECT_EQ(cli::run({"fingerfab", "transform-stl", in, "--by", "20", "--rot", "1,2", "--out", out}),
            cli::kExitUsage);
}

TEST(Cli, EditGcodeWritesReport) {
  const auto dir = scratch_dir("cli-edit");
  const auto in = (source_dir() / "tests" / "corpus" / "marlin_cura.gcode").string();
  ASSERT_EQ(cli::run({"fingerfab", "edit-gcode", in, "--out", (dir / "o.gcode").string(), "--report",
                      (dir / "r.json").string()}),
            0);
  const auto report = nlohmann::json::parse(slurp(dir / "r.json"));
  EXPECT_EQ(report.at("homing_lines_modified"), 1);
  EXPECT_EQ(report.at("leveling_lines_removed"), 2);
  EXPECT_EQ(cli::run({"fingerfab", "edit-gcode", (dir / "missing.gcode").string(), "--out", "x"}),
            cli::kExitUsage);
}

TEST(Cli, SliceStub) {
  const auto dir = scratch_dir("cli-slice");
  const auto in = (source_dir() / "data" / "battery_fingertip.stl").string();
  ASSERT_EQ(cli::run({"fingerfab", "slice", in, "--stub", "--out", (dir / "b.gcode").string()}), 0);
  EXPECT_NE(slurp(dir / "b.gcode").find("; layer_count: "), std::string::npos);
}

TEST(Cli, ProduceWritesLogAndRecords) {
  const auto dir = scratch_dir("cli-produce");
  ASSERT_EQ(cli::run({"fingerfab", "produce", "--design-a", "key", "--design-b", "battery", "--config",
                      sample_config(), "--events", (dir / "e.jsonl").string(), "--records",
                      (dir / "r.json").string()}),
            0);
  const auto records = nlohmann::json::parse(slurp(dir / "r.json"));
  ASSERT_EQ(records.size(), 2u);
  const auto log = slurp(dir / "e.jsonl");
  std::vector<ProductionEvent> events;
  std::size_t pos = 0;
  while (pos < log.size()) {
    const auto nl = log.find('\n', pos);
    events.push_back(parse_json_line(std::string_view(log).substr(pos, nl - pos)));
    pos = nl + 1;
  }
  EXPECT_TRUE(replay_log(events).ok);
  EXPECT_EQ(cli::run({"fingerfab", "produce", "--design-a", "nope", "--design-b", "key", "--config",
                      sample_config(), "--events", (dir / "e.jsonl").string(), "--records",
                      (dir / "r.json").string()}),
            cli::kExitDomain);
}

TEST(Cli, SimulateCampaign) {
  const auto dir = scratch_dir("cli-sim");
  const auto out = (dir / "report.csv").string();
  ASSERT_EQ(cli::run({"fingerfab", "simulate-campaign", "--trials", "2", "--config", sample_config(), "--seed", "4",
                      "--out", out}),
            0);
  const auto csv = slurp(out);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 85);
  EXPECT_EQ(cli::run({"fingerfab", "simulate-campaign", "--trials", "0", "--config", sample_config(), "--out", out}),
            cli::kExitUsage);
}

TEST(Cli, RunAllIsDeterministic) {
  const auto dir = scratch_dir("cli-runall");
  for (const char* sub : {"a", "b"}) {
    ASSERT_EQ(cli::run({"fingerfab", "run-all", "--config", sample_config(), "--seed", "7", "--out-dir",
                        (dir / sub).string()}),
              0);
  }
  for (const char* f : {"events.jsonl", "records.json", "report.csv"}) {
    const auto a = slurp(dir / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir / "b" / f)) << f;
  }
}
