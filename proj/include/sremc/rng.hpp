#pragma once

// Seedable, splittable random stream.  Every chain's trajectory is a pure
// function of (master seed, stream id).  The raw mt19937_64 engine is part
// of the C++ standard and fully deterministic; the uniform helpers below
// avoid std distributions, whose output is implementation-defined.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace sremc {

namespace detail {
// splitmix64, used to derive well-separated child seeds.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  Rng() : Rng(0, 0) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    std::uint64_t s = seed ^ (0xa0761d6478bd642fULL * (stream + 1));
    std::seed_seq seq{detail::splitmix64(s), detail::splitmix64(s),
                      detail::splitmix64(s), detail::splitmix64(s)};
    engine_.seed(seq);
  }

  // Child stream with a distinct id; independent of this stream's position.
  Rng split(std::uint64_t child) const { return Rng(seed_, stream_ * 0x10001ULL + child + 1); }

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n >= 1 (Lemire's multiply-shift; the tiny
  // modulo bias is irrelevant at 64 bits).
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  bool coin() { return (engine_() & 1ULL) != 0; }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Exact state round-trip for checkpointing.
  std::string serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << stream_ << ' ' << engine_;
    return os.str();
  }
  static Rng deserialize(const std::string& s) {
    Rng r;
    std::istringstream is(s);
    is >> r.seed_ >> r.stream_ >> r.engine_;
    if (!is) throw std::runtime_error("Rng::deserialize: malformed state");
    return r;
  }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.stream_ == b.stream_ && a.engine_ == b.engine_;
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace sremc
