#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace bcolor {

inline constexpr uint64_t splitmix_step(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr uint64_t mix64(uint64_t z) { return splitmix_step(z + 0x9e3779b97f4a7c15ULL); }

inline constexpr uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

// SplitMix64 stream. Small state, cheap to derive per (node, round, tag).
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix_step(state_);
  }

  // Uniform in [0, bound), rejection-sampled, bound > 0.
  uint64_t below(uint64_t bound) {
    const uint64_t limit = bound * (UINT64_MAX / bound);
    uint64_t v;
    do v = next();
    while (v >= limit);
    return v % bound;
  }

  // Uniform in [lo, hi].
  int64_t range(int64_t lo, int64_t hi) { return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1))); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) {
    if (p <= 0) return false;
    if (p >= 1) return true;
    return uniform() < p;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  uint64_t state_;
};

inline Rng derive_rng(uint64_t master_seed, uint64_t node, uint64_t round, uint64_t tag) {
  uint64_t s = mix64(master_seed ^ mix64(tag));
  s = mix64(s ^ mix64(node + 0x632be59bd9b4e019ULL));
  s = mix64(s ^ mix64(round + 0x85157af5ULL));
  return Rng(s);
}

inline Rng derive_rng(uint64_t master_seed, uint64_t node, uint64_t round, std::string_view tag) {
  return derive_rng(master_seed, node, round, hash_tag(tag));
}

}  // namespace bcolor
