#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace fingerfab {

using MagazineSlot = std::optional<std::string>;

enum class MagazineKind { finger_base, qfe };

const char* magazine_kind_name(MagazineKind k);
MagazineKind parse_magazine_kind(std::string_view name);

/// Ordered storage of finger bases or finished fingers. Capacity is the slot
/// count; an empty optional is a free slot.
struct Magazine {
  std::string id;
  MagazineKind kind = MagazineKind::finger_base;
  std::vector<MagazineSlot> slots;

  std::size_t capacity() const { return slots.size(); }
  std::size_t occupied() const;
  std::optional<std::size_t> first_occupied() const;
  std::optional<std::size_t> first_free() const;
  /// First index i with slots i and i + 1 both free.
  std::optional<std::size_t> first_free_pair() const;

  /// Throws std::invalid_argument on duplicate item ids.
  void validate() const;
};

enum class FingerStatus { in_production, ready, failed };

const char* finger_status_name(FingerStatus s);

struct FingerTimestamps {
  std::optional<double> base_picked;
  std::optional<double> inserted_locked;
  std::optional<double> print_started;
  std::optional<double> print_finished;
  std::optional<double> stored_in_qfe;

  bool all_present() const;
  /// Present timestamps are non-decreasing in declaration order.
  bool monotone() const;
};

/// One produced (or attempted) finger.
struct FingerRecord {
  std::string id;
  std::string base_id;  // empty if no base was taken
  std::string fingertip_design_id;
  std::string printer_id;
  FingerTimestamps timestamps;
  FingerStatus status = FingerStatus::in_production;
  std::string failure;  // reason, when status == failed
  std::string qfe_magazine;
  std::optional<std::size_t> qfe_slot;

  bool consumed_base() const { return !base_id.empty(); }
};

}  // namespace fingerfab
