#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace smg {

// Counter-free PCG-XSH-RR style generator with a splitmix64 seeding path.
// Hand-rolled so that streams are bit-reproducible across platforms and the
// full state (2 words) can be checkpointed.
class Rng {
 public:
  Rng() : Rng(0u) {}
  explicit Rng(std::uint64_t seed) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    state_ = splitmix(seed + 0x9e3779b97f4a7c15ull);
    inc_ = splitmix(state_) | 1ull;
    next();
  }

  std::uint64_t next() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ull + inc_;
    std::uint64_t xorshifted = ((old >> 18u) ^ old) >> 27u;
    std::uint64_t rot = old >> 59u;
    std::uint64_t lo = (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
    // widen to 64 bits with a second draw of the low word
    std::uint64_t old2 = state_;
    state_ = old2 * 6364136223846793005ull + inc_;
    std::uint64_t xs2 = ((old2 >> 18u) ^ old2) >> 27u;
    std::uint64_t rot2 = old2 >> 59u;
    std::uint64_t hi = (xs2 >> rot2) | (xs2 << ((-rot2) & 31u));
    return (hi << 32) | (lo & 0xffffffffull);
  }

  // uniform in [0,1)
  double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // uniform in [lo,hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // index in [0,n)
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  // standard normal via Box-Muller; no cached spare so state stays 2 words
  double normal() {
    double u1 = u01();
    double u2 = u01();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Fisher-Yates-free distinct index sample (Floyd's algorithm), sorted output
  std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      std::size_t t = index(j + 1);
      bool seen = false;
      for (std::size_t v : out)
        if (v == t) { seen = true; break; }
      out.push_back(seen ? j : t);
    }
    return out;
  }

  std::uint64_t state_word0() const { return state_; }
  std::uint64_t state_word1() const { return inc_; }
  void restore(std::uint64_t s0, std::uint64_t s1) {
    state_ = s0;
    inc_ = s1;
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // FNV-1a, used for stream derivation and content hashing
  static std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
};

// Named substream: independent generator derived from (root seed, stream name).
// Both trainer implementations draw from identically named streams so that
// shared concerns (env, buffer, policy) consume identical sequences.
inline Rng named_stream(std::uint64_t root_seed, const std::string& name) {
  return Rng(Rng::splitmix(root_seed) ^ Rng::fnv1a(name));
}

} // namespace smg
