#include <gtest/gtest.h>

#include <map>

#include <fingerfab/production.hpp>

#include "production_rig.hpp"

using namespace fingerfab;
using fingerfab::testing::ProductionRig;

namespace {

struct Interval {
  double begin;
  double end;
};

std::vector<Interval> robot_intervals(const std::vector<ProductionEvent>& events) {
  std::vector<Interval> out;
  std::optional<double> open;
  for (const auto& e : events) {
    if (e.actor != Actor::robot_A) continue;
    if (e.action.rfind("skill_begin:", 0) == 0) {
      EXPECT_FALSE(open) << "nested skill at t=" << e.time;
      open = e.time;
    } else {
      EXPECT_TRUE(open);
      out.push_back({*open, e.time});
      open.reset();
    }
  }
  return out;
}

std::optional<double> time_of(const std::vector<ProductionEvent>& events, const std::string& action,
                              const std::string& subject) {
  for (const auto& e : events) {
    if (e.action == action && e.subject == subject) return e.time;
  }
  return std::nullopt;
}

}  // namespace

TEST(Production, SingleFingerLifecycle) {
  ProductionRig rig;
  ProductionCell cell(rig.setup, rig.clock);
  const auto r = cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1");
  EXPECT_EQ(r.status, FingerStatus::ready) << r.failure;
  EXPECT_EQ(r.base_id, "A1");
  EXPECT_TRUE(r.timestamps.all_present());
  EXPECT_TRUE(r.timestamps.monotone());
  EXPECT_NEAR(*r.timestamps.print_finished - *r.timestamps.print_started, 337.0, 5.0 + 1e-9);
  EXPECT_EQ(*cell.magazine("qfe_1").slots[*r.qfe_slot], r.id);
  EXPECT_EQ(cell.magazine("magazine_A").occupied(), 3u);
  EXPECT_TRUE(replay_log(cell.events()).ok) << replay_log(cell.events()).violation;
}

TEST(Production, PairPrintsOverlapAndRobotNeverDoubleBooks) {
  for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{
           {"key", "ethernet"}, {"battery", "key"}, {"ethernet", "battery"}, {"key", "key"}}) {
    ProductionRig rig;
    ProductionCell cell(rig.setup, rig.clock);
    const auto pair = cell.produce_finger_pair(a, b);
    ASSERT_EQ(pair.first.status, FingerStatus::ready) << pair.first.failure;
    ASSERT_EQ(pair.second.status, FingerStatus::ready) << pair.second.failure;
    const auto& t1 = pair.first.timestamps;
    const auto& t2 = pair.second.timestamps;
    EXPECT_LT(*t2.print_started, *t1.print_finished) << a << "/" << b;
    EXPECT_LT(*t1.print_started, *t2.print_finished);
    EXPECT_GE(*t2.base_picked, *t1.print_started);

    const auto iv = robot_intervals(cell.events());
    for (std::size_t i = 1; i < iv.size(); ++i) EXPECT_GE(iv[i].begin, iv[i - 1].end);

    const auto verdict = replay_log(cell.events());
    EXPECT_TRUE(verdict.ok) << verdict.violation;
    // Inventory: two bases gone, two fingers side by side in the QFE magazine.
    EXPECT_EQ(cell.magazine("magazine_A").occupied() + cell.magazine("magazine_B").occupied(),
              cell.initial_bases() - 2);
    EXPECT_EQ(cell.magazine("qfe_1").occupied(), 2u);
    EXPECT_EQ(*pair.second.qfe_slot, *pair.first.qfe_slot + 1);
  }
}

TEST(Production, PairUsesAssignedPrintersAndMagazines) {
  ProductionRig rig;
  ProductionCell cell(rig.setup, rig.clock);
  const auto pair = cell.produce_finger_pair("key", "battery");
  EXPECT_EQ(pair.first.printer_id, "printer_A");
  EXPECT_EQ(pair.second.printer_id, "printer_B");
  EXPECT_EQ(pair.first.base_id, "A1");
  EXPECT_EQ(pair.second.base_id, "B1");
  EXPECT_EQ(time_of(cell.events(), "print_started", pair.first.id), *pair.first.timestamps.print_started);
}

TEST(Production, IdenticalSeedsGiveIdenticalLogs) {
  auto run = [](std::uint64_t seed) {
    ProductionRig rig;
    rig.setup.robot_model.skill_success[SkillKind::insert] = 0.7;
    rig.setup.robot_model.rng_seed = seed;
    ProductionCell cell(rig.setup, rig.clock);
    cell.produce_finger_pair("key", "ethernet");
    cell.produce_finger_pair("battery", "key");
    return to_json_lines(cell.events());
  };
  EXPECT_EQ(run(42), run(42));
  bool any_difference = false;
  for (std::uint64_t s = 1; s < 8 && !any_difference; ++s) any_difference = run(s) != run(42);
  EXPECT_TRUE(any_difference);
}

TEST(Production, PrinterFaultFailsOnlyThatFinger) {
  MockPrinterConfig cfg;
  cfg.faults = {{"ethernet", 0.5}};
  ProductionRig rig(cfg);
  ProductionCell cell(rig.setup, rig.clock);
  const auto pair = cell.produce_finger_pair("ethernet", "key");
  EXPECT_EQ(pair.first.status, FingerStatus::failed);
  EXPECT_NE(pair.first.failure.find("50%"), std::string::npos) << pair.first.failure;
  EXPECT_EQ(pair.second.status, FingerStatus::ready);
  EXPECT_TRUE(pair.first.consumed_base());
  EXPECT_FALSE(pair.first.qfe_slot);
  EXPECT_EQ(cell.magazine("qfe_1").occupied(), 1u);
  const auto verdict = replay_log(cell.events());
  EXPECT_TRUE(verdict.ok) << verdict.violation;
  // The printer is released for the next job.
  EXPECT_EQ(rig.printer_a->get_job_state().phase, PrinterPhase::operational);
}

TEST(Production, PrintRetryRestartsThePrint) {
  MockPrinterConfig cfg;
  cfg.faults = {{"key", 0.25}};
  ProductionRig rig(cfg);
  rig.setup.print_retries = 2;
  ProductionCell cell(rig.setup, rig.clock);
  const auto r = cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1");
  EXPECT_EQ(r.status, FingerStatus::failed);
  int retries = 0, failures = 0;
  for (const auto& e : cell.events()) {
    retries += e.action == "print_retry";
    failures += e.action == "print_failed";
  }
  EXPECT_EQ(retries, 2);
  EXPECT_EQ(failures, 3);
  EXPECT_TRUE(replay_log(cell.events()).ok) << replay_log(cell.events()).violation;
}

TEST(Production, RobotFailureBeforeBasePickKeepsTheBase) {
  ProductionRig rig;
  rig.setup.robot_model.skill_success[SkillKind::pick] = 0.0;
  ProductionCell cell(rig.setup, rig.clock);
  const auto r = cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1");
  EXPECT_EQ(r.status, FingerStatus::failed);
  EXPECT_FALSE(r.consumed_base());
  EXPECT_EQ(cell.magazine("magazine_A").occupied(), 4u);
  EXPECT_TRUE(replay_log(cell.events()).ok) << replay_log(cell.events()).violation;
}

TEST(Production, RobotFailureAfterBasePickConsumesIt) {
  ProductionRig rig;
  rig.setup.robot_model.skill_success[SkillKind::turn] = 0.0;
  ProductionCell cell(rig.setup, rig.clock);
  const auto r = cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1");
  EXPECT_EQ(r.status, FingerStatus::failed);
  EXPECT_TRUE(r.consumed_base());
  EXPECT_EQ(cell.magazine("magazine_A").occupied(), 3u);
  EXPECT_TRUE(replay_log(cell.events()).ok) << replay_log(cell.events()).violation;
}

TEST(Production, PreconditionsThrowBeforeAnyAction) {
  {
    ProductionRig rig(MockPrinterConfig{}, 0);
    ProductionCell cell(rig.setup, rig.clock);
    EXPECT_THROW(cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1"), ProductionError);
    EXPECT_TRUE(cell.events().empty());
  }
  {
    ProductionRig rig(MockPrinterConfig{}, 2, 0);
    ProductionCell cell(rig.setup, rig.clock);
    EXPECT_THROW(cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1"), ProductionError);
  }
  {
    ProductionRig rig;
    ProductionCell cell(rig.setup, rig.clock);
    EXPECT_THROW(cell.produce_finger("nope", "printer_A", "magazine_A", "qfe_1"), ProductionError);
    EXPECT_THROW(cell.produce_finger("key", "printer_Z", "magazine_A", "qfe_1"), ProductionError);
    EXPECT_THROW(cell.produce_finger("key", "printer_A", "qfe_1", "qfe_1"), ProductionError);
    rig.printer_a->upload_gcode("x.gcode", "G1");
    rig.printer_a->start_job("x.gcode");
    EXPECT_THROW(cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1"), ProductionError);
    EXPECT_TRUE(cell.events().empty());
  }
}

TEST(Production, OversizedDesignFailsInGcodePreparation) {
  ProductionRig rig;
  rig.setup.designs["big"] = {"box", fingerfab::testing::box_mesh(50, 10, 5), Rotation(), "key"};
  ProductionCell cell(rig.setup, rig.clock);
  const auto r = cell.produce_finger("big", "printer_A", "magazine_A", "qfe_1");
  EXPECT_EQ(r.status, FingerStatus::failed);
  EXPECT_NE(r.failure.find("print pipeline"), std::string::npos) << r.failure;
  EXPECT_TRUE(replay_log(cell.events()).ok) << replay_log(cell.events()).violation;
}

TEST(Production, SetupValidation) {
  ProductionRig rig;
  auto bad = rig.setup;
  bad.printers.pop_back();
  EXPECT_THROW(ProductionCell(bad, rig.clock), ProductionError);
  bad = rig.setup;
  bad.magazines.push_back(bad.magazines.front());
  EXPECT_THROW(ProductionCell(bad, rig.clock), ProductionError);
}

TEST(Production, UploadedGcodeIsSafe) {
  ProductionRig rig;
  rig.setup.slice.post_print_commands = {"G1 Z40 F600"};
  ProductionCell cell(rig.setup, rig.clock);
  const auto r = cell.produce_finger("key", "printer_A", "magazine_A", "qfe_1");
  const auto body = rig.printer_a->file_body("key_" + r.id + ".gcode");
  ASSERT_TRUE(body);
  const auto doc = parse_gcode(*body);
  for (const auto& l : doc.lines) {
    EXPECT_FALSE(is_bare_homing(l)) << l.text;
    EXPECT_FALSE(is_leveling_enable(l)) << l.text;
  }
  EXPECT_NE(body->find("G1 Z40 F600"), std::string::npos);
}

TEST(EventLog, JsonLinesRoundTrip) {
  ProductionRig rig;
  ProductionCell cell(rig.setup, rig.clock);
  cell.produce_finger_pair("key", "battery");
  const auto text = to_json_lines(cell.events());
  std::vector<ProductionEvent> back;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    back.push_back(parse_json_line(std::string_view(text).substr(pos, nl - pos)));
    pos = nl + 1;
  }
  EXPECT_EQ(back, cell.events());
}

TEST(Replay, DetectsViolations) {
  ProductionRig rig;
  ProductionCell cell(rig.setup, rig.clock);
  cell.produce_finger_pair("key", "ethernet");
  const auto good = cell.events();
  ASSERT_TRUE(replay_log(good).ok);

  auto swapped = good;
  std::swap(swapped[3].time, swapped[10].time);
  EXPECT_FALSE(replay_log(swapped).ok);

  auto missing_store = good;
  std::erase_if(missing_store, [](const ProductionEvent& e) { return e.action == "stored_in_qfe"; });
  EXPECT_FALSE(replay_log(missing_store).ok);

  auto overlap = good;
  for (auto it = overlap.begin(); it != overlap.end(); ++it) {
    if (it->action.rfind("skill_end:", 0) == 0) {
      overlap.erase(it);
      break;
    }
  }
  EXPECT_FALSE(replay_log(overlap).ok);

  // Second finger started only after the first print finished: no parallelism.
  const auto f1_finish = *time_of(good, "print_finished", "F1");
  std::vector<ProductionEvent> serial;
  for (const auto& e : good) {
    if (e.subject != "F2") serial.push_back(e);
  }
  for (const auto& e : good) {
    if (e.subject == "F2") serial.push_back({e.time + f1_finish + 100.0, e.actor, e.action, e.subject});
  }
  std::stable_sort(serial.begin(), serial.end(),
                   [](const ProductionEvent& a, const ProductionEvent& b) { return a.time < b.time; });
  EXPECT_FALSE(replay_log(serial).ok);

  auto extra_base = good;
  extra_base.push_back({good.back().time, Actor::coordinator, "base_picked", "F9"});
  EXPECT_FALSE(replay_log(extra_base).ok);
}
