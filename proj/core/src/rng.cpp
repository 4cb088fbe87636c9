#include "pathosyn/rng.hpp"

namespace pathosyn {

RngKey RngKey::fold(std::string_view label) const {
  // FNV-1a over the label, then folded like an integer.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fold(h);
}

}  // namespace pathosyn
