#include <gtest/gtest.h>

#include <array>
#include <cstdlib>
#include <map>
#include <random>

#include <fingerfab/qfe.hpp>

using namespace fingerfab;

namespace {

QfeUnitState unit_at(QfePhase p) {
  QfeUnitState u{p, std::nullopt};
  if (p == QfePhase::locked) u.holding = "F1";
  return u;
}

}  // namespace

TEST(Qfe, TransitionTableIsExactlyTheNeighbourRelation) {
  int legal = 0;
  for (auto from : kAllQfePhases) {
    for (auto to : kAllQfePhases) {
      const int d = std::abs(static_cast<int>(from) - static_cast<int>(to));
      const bool expected = d == 1;
      EXPECT_EQ(is_legal_transition(from, to), expected) << qfe_phase_name(from) << " -> " << qfe_phase_name(to);
      MagazineSlot slot;
      if (to == QfePhase::locked) slot = "F1";
      const auto unit = unit_at(from);
      if (expected) {
        ++legal;
        const auto next = qfe_transition(unit, to, slot);
        EXPECT_EQ(next.phase, to);
        EXPECT_EQ(next.holding.has_value(), to == QfePhase::locked);
      } else {
        try {
          qfe_transition(unit, to, slot);
          ADD_FAILURE() << qfe_phase_name(from) << " -> " << qfe_phase_name(to) << " accepted";
        } catch (const IllegalTransition& e) {
          EXPECT_EQ(e.from(), from);
          EXPECT_EQ(e.to(), to);
        }
      }
    }
  }
  EXPECT_EQ(legal, 8);
}

TEST(Qfe, LockingMovesTheFinger) {
  MagazineSlot slot = "F7";
  auto u = qfe_transition(unit_at(QfePhase::fingers_inserted), QfePhase::locked, slot);
  EXPECT_EQ(u.holding, "F7");
  EXPECT_FALSE(slot);
  MagazineSlot empty;
  EXPECT_THROW(qfe_transition(unit_at(QfePhase::fingers_inserted), QfePhase::locked, empty), QfeError);
  MagazineSlot full = "F8";
  EXPECT_THROW(qfe_transition(u, QfePhase::fingers_inserted, full), QfeError);
  u = qfe_transition(u, QfePhase::fingers_inserted, slot);
  EXPECT_EQ(slot, "F7");
  EXPECT_FALSE(u.holding);
}

TEST(Qfe, AttachDetachRoundTrip) {
  Magazine m{"qfe_1", MagazineKind::qfe, {"F1", "F2", std::nullopt}};
  const auto before = m.slots;
  QfeUnitState left, right;
  left = qfe_attach(left, m.slots[0]);
  right = qfe_attach(right, m.slots[1]);
  EXPECT_EQ(left.phase, QfePhase::locked);
  EXPECT_EQ(right.holding, "F2");
  EXPECT_EQ(m.occupied(), 0u);
  left = qfe_detach(left, m.slots[0]);
  right = qfe_detach(right, m.slots[1]);
  EXPECT_EQ(m.slots, before);
  EXPECT_EQ(left, QfeUnitState{});
  EXPECT_EQ(right, QfeUnitState{});
}

TEST(Qfe, AttachAndDetachPreconditions) {
  MagazineSlot empty, full = "F1";
  EXPECT_THROW(qfe_attach(QfeUnitState{}, empty), QfeError);
  EXPECT_THROW(qfe_attach(unit_at(QfePhase::locked), full), QfeError);
  EXPECT_THROW(qfe_attach(unit_at(QfePhase::aligned_above_tongues), full), QfeError);
  EXPECT_THROW(qfe_detach(QfeUnitState{}, empty), QfeError);
  EXPECT_THROW(qfe_detach(unit_at(QfePhase::locked), full), QfeError);
  EXPECT_EQ(full, "F1");
}

TEST(Qfe, FingerConservationOverRandomSequences) {
  std::mt19937_64 gen(2024);
  for (int seq = 0; seq < 1000; ++seq) {
    Magazine m{"qfe", MagazineKind::qfe, {"F1", std::nullopt, "F2", "F3", std::nullopt}};
    std::array<QfeUnitState, 2> units{};
    for (int step = 0; step < 30; ++step) {
      auto& u = units[gen() % 2];
      auto& slot = m.slots[gen() % m.slots.size()];
      const auto unit_before = u;
      const auto slot_before = slot;
      try {
        u = gen() % 2 ? qfe_attach(u, slot) : qfe_detach(u, slot);
      } catch (const QfeError&) {
        EXPECT_EQ(u, unit_before);
        EXPECT_EQ(slot, slot_before);
      }
      std::map<std::string, int> seen;
      for (const auto& s : m.slots) {
        if (s) ++seen[*s];
      }
      for (const auto& x : units) {
        EXPECT_EQ(x.holding.has_value(), x.phase == QfePhase::locked);
        EXPECT_TRUE(x.phase == QfePhase::idle || x.phase == QfePhase::locked);
        if (x.holding) ++seen[*x.holding];
      }
      ASSERT_EQ(seen.size(), 3u);
      for (const auto& [id, n] : seen) ASSERT_EQ(n, 1) << id;
    }
  }
}

TEST(Magazine, SlotQueries) {
  Magazine m{"m", MagazineKind::finger_base, {std::nullopt, "a", std::nullopt, std::nullopt, "b"}};
  EXPECT_EQ(m.capacity(), 5u);
  EXPECT_EQ(m.occupied(), 2u);
  EXPECT_EQ(m.first_occupied(), 1u);
  EXPECT_EQ(m.first_free(), 0u);
  EXPECT_EQ(m.first_free_pair(), 2u);
  m.slots[4] = "a";
  EXPECT_THROW(m.validate(), std::invalid_argument);
  EXPECT_EQ(parse_magazine_kind("qfe"), MagazineKind::qfe);
}
