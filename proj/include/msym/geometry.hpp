#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msym/expression.hpp"

namespace msym {

/// Coordinate environments over a single global chart.
enum class SpaceTag {
  jet,                  ///< J1: (x, y, v)
  restricted_momentum,  ///< restricted multimomentum bundle: (x, y, p^nu_A)
  extended_momentum,    ///< extended multimomentum bundle: (x, y, p^nu_A, p)
  unified_w,            ///< W: (x, y, v, p^nu_A, p)
  unified_w0,           ///< W0: (x, y, v, p^nu_A)
  custom,               ///< explicit coordinate list (tests, pullback sources)
};

const char* to_string(SpaceTag tag);

/// Ordered coordinate list of a space. Index positions are what forms use as
/// their basis labels.
class CoordinateSpace {
 public:
  static std::shared_ptr<const CoordinateSpace> make(SpaceTag tag, int m, int n);
  static std::shared_ptr<const CoordinateSpace> make_custom(int m, int n, std::vector<Symbol> coordinates);

  SpaceTag tag() const { return tag_; }
  int base_dim() const { return m_; }
  int fiber_dim() const { return n_; }
  std::size_t dim() const { return coords_.size(); }
  const std::vector<Symbol>& coordinates() const { return coords_; }
  const Symbol& coordinate(std::size_t i) const { return coords_[i]; }
  std::optional<std::size_t> index_of(const Symbol& s) const;
  /// Like index_of but throws SymbolError.
  std::size_t require(const Symbol& s) const;
  bool contains(const Symbol& s) const { return index_of(s).has_value(); }

  /// Position of dx^nu in this space (throws if base coordinates are absent).
  std::size_t base_index(int nu) const { return require(Symbol::x(nu)); }

  friend bool operator==(const CoordinateSpace& a, const CoordinateSpace& b) {
    return a.m_ == b.m_ && a.n_ == b.n_ && a.coords_ == b.coords_;
  }

 private:
  CoordinateSpace(SpaceTag tag, int m, int n, std::vector<Symbol> coords);

  SpaceTag tag_;
  int m_;
  int n_;
  std::vector<Symbol> coords_;
  std::vector<std::pair<Symbol, std::size_t>> sorted_;
};

using SpacePtr = std::shared_ptr<const CoordinateSpace>;

/// Coordinate groups in canonical order (A-major, then nu).
std::vector<Symbol> base_symbols(int m);
std::vector<Symbol> field_symbols(int n);
std::vector<Symbol> velocity_symbols(int m, int n);
std::vector<Symbol> momentum_symbols(int m, int n);

/// Bundle data pi: E -> M together with a first-order Lagrangian density
/// L d^m x, with d^m x = dx1^...^dxm.
struct FieldModel {
  int m = 1;
  int n = 1;
  Expression lagrangian;
  std::string source;  // text the Lagrangian was parsed from, if any

  SpacePtr space(SpaceTag tag) const { return CoordinateSpace::make(tag, m, n); }
};

/// Validates dimensions and symbol ranges. Throws ModelError for momentum or
/// jet symbols in the Lagrangian, SymbolError for out-of-range indices and
/// ParseError from the parser.
FieldModel build_model(int m, int n, std::string_view lagrangian_text);
FieldModel build_model(int m, int n, const Expression& lagrangian);

}  // namespace msym
