#include "protodep/property.hpp"

#include <algorithm>
#include <cctype>

namespace protodep {

namespace {
constexpr std::array<std::string_view, kNumProperties> kNames = {
    "confidentiality", "integrity", "authentication", "accounting", "include", "generate",
};
}  // namespace

std::string_view property_name(PropertyKind p) noexcept { return kNames[index_of(p)]; }

std::optional<PropertyKind> parse_property(std::string_view name) noexcept {
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (lowered == kNames[i]) return static_cast<PropertyKind>(i);
  }
  return std::nullopt;
}

}  // namespace protodep
