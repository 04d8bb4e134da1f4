#include <fingerfab/cell.hpp>

#include <algorithm>
#include <set>
#include <stdexcept>

namespace fingerfab {

const char* magazine_kind_name(MagazineKind k) {
  return k == MagazineKind::finger_base ? "finger_base" : "qfe";
}

MagazineKind parse_magazine_kind(std::string_view name) {
  if (name == "finger_base") return MagazineKind::finger_base;
  if (name == "qfe") return MagazineKind::qfe;
  throw std::invalid_argument("unknown magazine kind '" + std::string(name) + "'");
}

std::size_t Magazine::occupied() const {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); }));
}

std::optional<std::size_t> Magazine::first_occupied() const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Magazine::first_free() const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Magazine::first_free_pair() const {
  for (std::size_t i = 0; i + 1 < slots.size(); ++i) {
    if (!slots[i] && !slots[i + 1]) return i;
  }
  return std::nullopt;
}

void Magazine::validate() const {
  std::set<std::string> seen;
  for (const auto& s : slots) {
    if (s && !seen.insert(*s).second) {
      throw std::invalid_argument("magazine " + id + " holds '" + *s + "' twice");
    }
  }
}

const char* finger_status_name(FingerStatus s) {
  switch (s) {
    case FingerStatus::in_production:
      return "in_production";
    case FingerStatus::ready:
      return "ready";
    case FingerStatus::failed:
      return "failed";
  }
  return "?";
}

bool FingerTimestamps::all_present() const {
  return base_picked && inserted_locked && print_started && print_finished && stored_in_qfe;
}

bool FingerTimestamps::monotone() const {
  std::optional<double> prev;
  for (const auto& t : {base_picked, inserted_locked, print_started, print_finished, stored_in_qfe}) {
    if (!t) continue;
    if (prev && *t < *prev) return false;
    prev = t;
  }
  return true;
}

}  // namespace fingerfab
