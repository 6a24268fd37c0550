#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dgnet/common.hpp"

namespace dgnet {

// Seeded random source with explicit integer/real draws.
//
// std::mt19937_64 output is specified bit-for-bit by the standard, but the
// standard <random> distributions are not; every draw here is implemented on
// top of raw engine output so that a given seed produces the same stream on
// every platform and standard library.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw Error("uniform_int: inverted range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (both values used, cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Index draw from nonnegative weights. Throws on all-zero or negative input.
  std::size_t weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw Error("weighted_index: negative weight");
      total += w;
    }
    if (!(total > 0.0)) throw Error("weighted_index: all weights are zero");
    const double target = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (target < acc) return i;
    }
    return weights.size() - 1;  // target landed on the accumulated rounding tail
  }

  // Engine state round-trips through text, used by checkpoint resume.
  std::string save_state() const {
    std::ostringstream os;
    os << engine_;
    if (has_spare_) os << " 1 " << hex_double(spare_);
    else os << " 0";
    return os.str();
  }

  void restore_state(const std::string& state) {
    std::istringstream is(state);
    is >> engine_;
    int spare_flag = 0;
    is >> spare_flag;
    if (is.fail()) throw ParseError("Rng::restore_state: malformed state string");
    has_spare_ = spare_flag != 0;
    if (has_spare_) {
      std::string hex;
      is >> hex;
      spare_ = unhex_double(hex);
    }
  }

 private:
  static std::string hex_double(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    std::ostringstream os;
    os << std::hex << bits;
    return os.str();
  }

  static double unhex_double(const std::string& s) {
    std::uint64_t bits = std::stoull(s, nullptr, 16);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dgnet
