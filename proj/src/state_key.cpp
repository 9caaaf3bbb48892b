#include "healrt/state_key.hpp"

#include <charconv>
#include <stdexcept>

namespace healrt {

StateKey::StateKey(std::initializer_list<std::int32_t> parts) {
  if (parts.size() > kMaxParts) {
    throw std::invalid_argument("StateKey: too many components");
  }
  for (auto p : parts) parts_[size_++] = p;
}

std::string StateKey::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < size_; ++i) {
    if (i) out.push_back(',');
    out += std::to_string(parts_[i]);
  }
  return out;
}

StateKey StateKey::parse(std::string_view text) {
  StateKey key;
  if (text.empty()) return key;
  std::size_t pos = 0;
  while (true) {
    if (key.size_ == kMaxParts) {
      throw std::invalid_argument("StateKey: too many components in '" + std::string(text) + "'");
    }
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string_view::npos ? text.size() - pos : comma - pos);
    std::int32_t value = 0;
    const auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), value);
    if (ec != std::errc{} || ptr != piece.data() + piece.size() || piece.empty()) {
      throw std::invalid_argument("StateKey: bad component in '" + std::string(text) + "'");
    }
    key.parts_[key.size_++] = value;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return key;
}

std::strong_ordering operator<=>(const StateKey& a, const StateKey& b) noexcept {
  const std::size_t n = a.size_ < b.size_ ? a.size_ : b.size_;
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = a.parts_[i] <=> b.parts_[i]; c != 0) return c;
  }
  return a.size_ <=> b.size_;
}

std::size_t StateKey::hash() const noexcept {
  // FNV-1a over the components.
  std::uint64_t h = 1469598103934665603ULL ^ size_;
  for (std::size_t i = 0; i < size_; ++i) {
    h ^= static_cast<std::uint32_t>(parts_[i]);
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

}  // namespace healrt
