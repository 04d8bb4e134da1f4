#pragma once

#include <stdexcept>
#include <string>

#include <fingerfab/cell.hpp>

namespace fingerfab {

/// Quick-finger-exchange unit phases, in attach order.
enum class QfePhase { idle, aligned_above_tongues, contact_force_applied, fingers_inserted, locked };

inline constexpr QfePhase kAllQfePhases[] = {QfePhase::idle, QfePhase::aligned_above_tongues,
                                             QfePhase::contact_force_applied,
                                             QfePhase::fingers_inserted, QfePhase::locked};

const char* qfe_phase_name(QfePhase p);

class QfeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllegalTransition : public QfeError {
 public:
  IllegalTransition(QfePhase from, QfePhase to);
  QfePhase from() const { return from_; }
  QfePhase to() const { return to_; }

 private:
  QfePhase from_, to_;
};

/// holding is set iff phase == locked.
struct QfeUnitState {
  QfePhase phase = QfePhase::idle;
  std::optional<std::string> holding;

  bool operator==(const QfeUnitState&) const = default;
};

/// Only neighbouring phases connect: forward while attaching, backward while
/// detaching. Inserting requires the secure stone to be raised first, so
/// nothing skips contact_force_applied.
bool is_legal_transition(QfePhase from, QfePhase to);

/// One phase step. Entering locked takes the finger out of `slot` (which
/// must be occupied); leaving locked puts it back (slot must be free).
QfeUnitState qfe_transition(const QfeUnitState& unit, QfePhase to, MagazineSlot& slot);

/// Full four-step attach from idle. Throws QfeError on a busy unit or an
/// empty slot.
QfeUnitState qfe_attach(const QfeUnitState& unit, MagazineSlot& slot);

/// Reverse sequence from locked back to idle, storing the finger in `slot`.
QfeUnitState qfe_detach(const QfeUnitState& unit, MagazineSlot& slot);

}  // namespace fingerfab
