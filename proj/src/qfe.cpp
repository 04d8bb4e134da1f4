#include <fingerfab/qfe.hpp>

#include <stdexcept>

namespace fingerfab {

const char* qfe_phase_name(QfePhase p) {
  switch (p) {
    case QfePhase::idle:
      return "idle";
    case QfePhase::aligned_above_tongues:
      return "aligned_above_tongues";
    case QfePhase::contact_force_applied:
      return "contact_force_applied";
    case QfePhase::fingers_inserted:
      return "fingers_inserted";
    case QfePhase::locked:
      return "locked";
  }
  return "?";
}

IllegalTransition::IllegalTransition(QfePhase from, QfePhase to)
    : QfeError(std::string("illegal QFE transition ") + qfe_phase_name(from) + " -> " +
               qfe_phase_name(to)),
      from_(from),
      to_(to) {}

bool is_legal_transition(QfePhase from, QfePhase to) {
  const int d = static_cast<int>(to) - static_cast<int>(from);
  return d == 1 || d == -1;
}

QfeUnitState qfe_transition(const QfeUnitState& unit, QfePhase to, MagazineSlot& slot) {
  if (!is_legal_transition(unit.phase, to)) throw IllegalTransition(unit.phase, to);
  QfeUnitState next = unit;
  next.phase = to;
  if (to == QfePhase::locked) {
    if (!slot) throw QfeError("cannot lock: magazine slot is empty");
    next.holding = std::move(*slot);
    slot.reset();
  } else if (unit.phase == QfePhase::locked) {
    if (slot) throw QfeError("cannot release into occupied slot holding '" + *slot + "'");
    slot = std::move(next.holding);
    next.holding.reset();
  }
  return next;
}

QfeUnitState qfe_attach(const QfeUnitState& unit, MagazineSlot& slot) {
  if (unit.phase == QfePhase::locked || unit.holding) {
    throw QfeError("QFE unit already holds '" + unit.holding.value_or("?") + "'");
  }
  if (unit.phase != QfePhase::idle) {
    throw QfeError(std::string("QFE attach must start from idle, unit is ") + qfe_phase_name(unit.phase));
  }
  if (!slot) throw QfeError("cannot attach from an empty magazine slot");
  QfeUnitState u = unit;
  for (auto p : {QfePhase::aligned_above_tongues, QfePhase::contact_force_applied,
                 QfePhase::fingers_inserted, QfePhase::locked}) {
    u = qfe_transition(u, p, slot);
  }
  return u;
}

QfeUnitState qfe_detach(const QfeUnitState& unit, MagazineSlot& slot) {
  if (unit.phase != QfePhase::locked) {
    throw QfeError(std::string("QFE detach needs a locked unit, unit is ") + qfe_phase_name(unit.phase));
  }
  if (slot) throw QfeError("cannot detach into occupied slot holding '" + *slot + "'");
  QfeUnitState u = unit;
  for (auto p : {QfePhase::fingers_inserted, QfePhase::contact_force_applied,
                 QfePhase::aligned_above_tongues, QfePhase::idle}) {
    u = qfe_transition(u, p, slot);
  }
  return u;
}

}  // namespace fingerfab
