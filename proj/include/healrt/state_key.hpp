#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>

namespace healrt {

/// Index into an ordered action set. The order doubles as the tie-break order.
using ActionId = std::uint32_t;

/// Canonical, hashable encoding of a projected system state.
///
/// A key is a short tuple of integers (grid coordinates, link/bucket/power, ...).
/// Equality and ordering are by value; the text form is the components joined
/// by commas, e.g. "17,28".
class StateKey {
 public:
  static constexpr std::size_t kMaxParts = 6;

  StateKey() = default;
  StateKey(std::initializer_list<std::int32_t> parts);

  std::size_t size() const noexcept { return size_; }
  std::int32_t operator[](std::size_t i) const { return parts_[i]; }

  std::string to_string() const;
  static StateKey parse(std::string_view text);

  friend bool operator==(const StateKey& a, const StateKey& b) noexcept {
    if (a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i) {
      if (a.parts_[i] != b.parts_[i]) return false;
    }
    return true;
  }
  friend std::strong_ordering operator<=>(const StateKey& a, const StateKey& b) noexcept;

  std::size_t hash() const noexcept;

 private:
  std::array<std::int32_t, kMaxParts> parts_{};
  std::uint8_t size_ = 0;
};

struct StateKeyHash {
  std::size_t operator()(const StateKey& k) const noexcept { return k.hash(); }
};

}  // namespace healrt

template <>
struct std::hash<healrt::StateKey> {
  std::size_t operator()(const healrt::StateKey& k) const noexcept { return k.hash(); }
};
