#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace protodep {

/// The six directed dependency relations between a source and a destination
/// identifier. Ordinals are part of every file format and must not change.
enum class PropertyKind : int {
  Confidentiality = 0,
  Integrity = 1,
  Authentication = 2,
  Accounting = 3,
  Include = 4,
  Generate = 5,
};

inline constexpr std::size_t kNumProperties = 6;

inline constexpr std::array<PropertyKind, kNumProperties> kAllProperties = {
    PropertyKind::Confidentiality, PropertyKind::Integrity, PropertyKind::Authentication,
    PropertyKind::Accounting,      PropertyKind::Include,   PropertyKind::Generate,
};

/// Lower-case canonical name ("integrity").
std::string_view property_name(PropertyKind p) noexcept;
std::optional<PropertyKind> parse_property(std::string_view name) noexcept;

constexpr std::size_t index_of(PropertyKind p) noexcept { return static_cast<std::size_t>(p); }

using Labels = std::array<bool, kNumProperties>;
using Probabilities = std::array<double, kNumProperties>;

inline bool any_label(const Labels& l) noexcept {
  for (bool b : l) {
    if (b) return true;
  }
  return false;
}

}  // namespace protodep
