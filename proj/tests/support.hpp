#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "msym/expression.hpp"
#include "msym/geometry.hpp"
#include "msym/parser.hpp"

namespace msym::test {

inline constexpr std::uint64_t kSeed = 20091106;

inline const char* kMinimalSurface = "sqrt(1 + v1_1^2 + v1_2^2)";
inline const char* kFreeField = "(v1_1^2 + v1_2^2)/2";

/// Uniform values in [lo, hi] for every coordinate of a space.
inline Assignment random_point(const CoordinateSpace& space, std::mt19937_64& rng, double lo = -0.5, double hi = 0.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  Assignment a;
  for (const auto& s : space.coordinates()) a[s] = u(rng);
  return a;
}

inline std::vector<double> slots_of(const CoordinateSpace& space, const Assignment& a) {
  std::vector<double> z;
  for (const auto& s : space.coordinates()) z.push_back(a.at(s));
  return z;
}

/// Random smooth expression over `symbols`, bounded on [-0.5, 0.5]^k.
class ExpressionGenerator {
 public:
  ExpressionGenerator(std::vector<Symbol> symbols, std::uint64_t seed) : symbols_(std::move(symbols)), rng_(seed) {}

  Expression operator()(int depth = 3) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
    switch (pick(rng_)) {
      case 0: return leaf_constant();
      case 1: return leaf_symbol();
      case 2:
      case 3: return (*this)(depth - 1) + (*this)(depth - 1);
      case 4:
      case 5: return (*this)(depth - 1) * (*this)(depth - 1);
      case 6: return pow((*this)(depth - 1), Rational(small_int(2, 3)));
      case 7: return apply(pick_func(), (*this)(depth - 1));
      case 8: return sqrt(Expression(1) + pow((*this)(depth - 1), Rational(2)));
      default: return (*this)(depth - 1) / (Expression(2) + pow((*this)(depth - 1), Rational(2)));
    }
  }

  const std::vector<Symbol>& symbols() const { return symbols_; }
  std::mt19937_64& rng() { return rng_; }

 private:
  int small_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  Expression leaf_constant() { return Expression(Rational(small_int(-5, 5), small_int(1, 4))); }
  Expression leaf_symbol() {
    return Expression(symbols_[static_cast<std::size_t>(small_int(0, static_cast<int>(symbols_.size()) - 1))]);
  }
  Func pick_func() {
    static const Func fs[] = {Func::sin, Func::cos, Func::exp};
    return fs[small_int(0, 2)];
  }

  std::vector<Symbol> symbols_;
  std::mt19937_64 rng_;
};

/// Random polynomial Lagrangian, quadratic in v with a constant positive
/// definite velocity Hessian (so hyper-regular), plus polynomial couplings
/// to x and y of degree <= 3.
inline std::string random_hyperregular_lagrangian(int m, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> c(-3, 3);
  std::string s;
  auto add = [&](const std::string& t) { s += (s.empty() ? "" : " + ") + t; };
  std::vector<std::string> vs;
  for (int a = 1; a <= n; ++a)
    for (int nu = 1; nu <= m; ++nu) vs.push_back("v" + std::to_string(a) + "_" + std::to_string(nu));
  // diagonally dominant symmetric Hessian: 4 on the diagonal, off-diagonal in [-1/2, 1/2]
  for (std::size_t i = 0; i < vs.size(); ++i) {
    add("2*" + vs[i] + "^2");
    for (std::size_t j = i + 1; j < vs.size(); ++j) add("(" + std::to_string(c(rng)) + "/6)*" + vs[i] + "*" + vs[j]);
  }
  const std::vector<std::string> xs = {"x1", "x2", "x3"};
  for (const auto& v : vs) {
    add("(" + std::to_string(c(rng)) + ")*x1*" + v);
    add("(" + std::to_string(c(rng)) + "/2)*y1^2*" + v);
  }
  add("(" + std::to_string(c(rng)) + ")*y1^3");
  add("(" + std::to_string(c(rng)) + ")*x" + std::to_string(m) + "^2*y" + std::to_string(n));
  return s;
}

}  // namespace msym::test
