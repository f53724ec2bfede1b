#pragma once

#include <cassert>
#include <cstdint>
#include <string>

namespace boundedq {

// One abstract shared-memory word. A word holds either a user value, a
// versioned null marker, or a reference to a descriptor (pool index plus a
// reuse stamp). Counters are stored as raw 64-bit words and never mix with
// tagged cell contents.
using Word = std::uint64_t;

namespace word {

inline constexpr int kTagShift = 62;
inline constexpr Word kPayloadMask = (Word{1} << kTagShift) - 1;

enum class Tag : Word { Value = 0, Null = 1, Desc = 2 };

inline constexpr Tag tag(Word w) { return static_cast<Tag>(w >> kTagShift); }
inline constexpr Word payload(Word w) { return w & kPayloadMask; }

inline constexpr Word value(std::uint64_t v) {
  assert(v <= kPayloadMask);
  return v;  // Tag::Value == 0
}

inline constexpr Word null(std::uint64_t round) {
  assert(round <= kPayloadMask);
  return (Word{1} << kTagShift) | round;
}

// The initial content of every value-location.
inline constexpr Word kNull0 = null(0);

inline constexpr bool is_value(Word w) { return tag(w) == Tag::Value; }
inline constexpr bool is_null(Word w) { return tag(w) == Tag::Null; }
inline constexpr bool is_desc(Word w) { return tag(w) == Tag::Desc; }
inline constexpr std::uint64_t null_round(Word w) {
  assert(is_null(w));
  return payload(w);
}

// Descriptor references: 16-bit pool index, 46-bit reuse stamp.
inline constexpr int kDescIdxBits = 16;
inline constexpr Word kDescIdxMask = (Word{1} << kDescIdxBits) - 1;

inline constexpr Word desc(std::uint32_t idx, std::uint64_t stamp) {
  assert(idx <= kDescIdxMask);
  return (Word{2} << kTagShift) | (stamp << kDescIdxBits) | idx;
}
inline constexpr std::uint32_t desc_idx(Word w) {
  assert(is_desc(w));
  return static_cast<std::uint32_t>(w & kDescIdxMask);
}
inline constexpr std::uint64_t desc_stamp(Word w) {
  assert(is_desc(w));
  return payload(w) >> kDescIdxBits;
}

inline std::string to_string(Word w) {
  switch (tag(w)) {
    case Tag::Value: return std::to_string(payload(w));
    case Tag::Null: return "bot(" + std::to_string(payload(w)) + ")";
    case Tag::Desc:
      return "desc(" + std::to_string(desc_idx(w)) + "," +
             std::to_string(desc_stamp(w)) + ")";
  }
  return "?";
}

}  // namespace word

}  // namespace boundedq
