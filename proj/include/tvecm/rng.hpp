#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tvecm {

/// Seeded random stream. One instance per worker; never shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return unif_(gen_); }
  double normal() { return norm_(gen_); }
  double normal(double mean, double sd) { return mean + sd * norm_(gen_); }

  /// Gamma(shape, rate) draw; mean = shape/rate.
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(gen_);
  }

  /// InvGamma(shape, rate): 1/X with X ~ Gamma(shape, rate); mean = rate/(shape-1).
  double inv_gamma(double shape, double rate) {
    double g = gamma(shape, rate);
    if (g <= 0.0) g = std::numeric_limits<double>::min();
    return 1.0 / g;
  }

  double beta(double a, double b) {
    double x = gamma(a, 1.0);
    double y = gamma(b, 1.0);
    return x / (x + y);
  }

  std::uint64_t integer() { return gen_(); }

  /// Derive an independent stream (e.g. per equation or per forecast origin).
  Rng spawn() {
    std::uint64_t s = gen_();
    // splitmix-style scramble so consecutive spawns decorrelate
    s += 0x9e3779b97f4a7c15ULL;
    s = (s ^ (s >> 30)) * 0xbf58476d1ce4e5b9ULL;
    s = (s ^ (s >> 27)) * 0x94d049bb133111ebULL;
    return Rng(s ^ (s >> 31));
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> norm_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

}  // namespace tvecm
