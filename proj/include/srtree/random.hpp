#pragma once

#include <array>
#include <cstdint>
#include <cmath>
#include <limits>
#include <random>
#include <span>

namespace srtree {

// 64-bit mixing function (splitmix64 finalizer). Bijective.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

// Philox4x32-10 counter based generator.
// A (key, stream) pair names an independent stream; draws within a stream
// advance a 64-bit block counter.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (have_ == 0) refill();
    --have_;
    return buf_[have_];
  }

  std::uint64_t blocks_used() const { return block_; }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;

  void refill() {
    std::array<std::uint32_t, 4> c{static_cast<std::uint32_t>(block_),
                                   static_cast<std::uint32_t>(block_ >> 32),
                                   static_cast<std::uint32_t>(stream_),
                                   static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      std::uint64_t p0 = std::uint64_t(kM0) * c[0];
      std::uint64_t p1 = std::uint64_t(kM1) * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += kW0;
      k[1] += kW1;
    }
    buf_[0] = (std::uint64_t(c[0]) << 32) | c[1];
    buf_[1] = (std::uint64_t(c[2]) << 32) | c[3];
    have_ = 2;
    ++block_;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int have_ = 0;
};

// Uniform on the open interval (0,1).
inline double uniform01(CounterRng& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal, polar method.
inline double normal01(CounterRng& g) {
  for (;;) {
    double u = 2.0 * uniform01(g) - 1.0, v = 2.0 * uniform01(g) - 1.0;
    double q = u * u + v * v;
    if (q < 1.0 && q > 0.0) return u * std::sqrt(-2.0 * std::log(q) / q);
  }
}

// Gamma(a, 1): exact shortcuts for a = 1/2 and 1, Marsaglia-Tsang otherwise.
inline double sample_gamma(CounterRng& g, double a) {
  if (a == 1.0) return -std::log(uniform01(g));
  if (a == 0.5) {
    double z = normal01(g);
    return 0.5 * z * z;
  }
  double boost = 1.0;
  if (a < 1.0) {
    boost = std::pow(uniform01(g), 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal01(g), v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform01(g);
    if (u < 1.0 - 0.0331 * x * x * x * x || std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return boost * d * v;
  }
}

// Dirichlet(params) into out; entries are kept strictly positive.
inline void sample_dirichlet(CounterRng& g, std::span<const double> params, std::span<double> out) {
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double x = sample_gamma(g, params[i]);
    if (!(x > 0.0)) x = std::numeric_limits<double>::min();
    out[i] = x;
    total += x;
  }
  for (std::size_t i = 0; i < params.size(); ++i) out[i] /= total;
}

// Index i drawn with probability w[i] (w sums to one).
inline int sample_index(CounterRng& g, std::span<const double> w) {
  double u = uniform01(g);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace srtree
