#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <utility>

namespace msym {

/// What a coordinate symbol stands for. The declaration order is the
/// canonical ordering of symbols inside normal forms.
enum class SymbolKind : std::uint8_t {
  base,             ///< x<nu>
  field,            ///< y<A>
  velocity,         ///< v<A>_<nu>
  momentum,         ///< p<A>_<nu>, the multimomentum p^nu_A
  affine_momentum,  ///< p
  jet_first,        ///< y<A>_<nu>, formal first derivative of a section
  jet_second,       ///< y<A>_<nu>_<mu>, formal second derivative (nu <= mu)
  auxiliary,        ///< w<i>, internal placeholder, never parsed
};

/// A coordinate symbol. Indices are 1-based; unused indices stay 0.
///
/// `field` carries A, `dir` carries nu and `dir2` carries mu. Only the
/// combinations produced by the named constructors are valid.
struct Symbol {
  SymbolKind kind = SymbolKind::base;
  int field = 0;
  int dir = 0;
  int dir2 = 0;

  static Symbol x(int nu) { return {SymbolKind::base, 0, nu, 0}; }
  static Symbol y(int a) { return {SymbolKind::field, a, 0, 0}; }
  static Symbol v(int a, int nu) { return {SymbolKind::velocity, a, nu, 0}; }
  static Symbol p(int a, int nu) { return {SymbolKind::momentum, a, nu, 0}; }
  static Symbol affine() { return {SymbolKind::affine_momentum, 0, 0, 0}; }
  static Symbol dy(int a, int nu) { return {SymbolKind::jet_first, a, nu, 0}; }
  static Symbol ddy(int a, int nu, int mu) {
    if (mu < nu) std::swap(nu, mu);
    return {SymbolKind::jet_second, a, nu, mu};
  }
  static Symbol aux(int i) { return {SymbolKind::auxiliary, 0, i, 0}; }

  std::string name() const {
    switch (kind) {
      case SymbolKind::base: return "x" + std::to_string(dir);
      case SymbolKind::field: return "y" + std::to_string(field);
      case SymbolKind::velocity: return "v" + std::to_string(field) + "_" + std::to_string(dir);
      case SymbolKind::momentum: return "p" + std::to_string(field) + "_" + std::to_string(dir);
      case SymbolKind::affine_momentum: return "p";
      case SymbolKind::jet_first: return "y" + std::to_string(field) + "_" + std::to_string(dir);
      case SymbolKind::jet_second:
        return "y" + std::to_string(field) + "_" + std::to_string(dir) + "_" + std::to_string(dir2);
      case SymbolKind::auxiliary: return "w" + std::to_string(dir);
    }
    return "?";
  }

  friend auto operator<=>(const Symbol&, const Symbol&) = default;
  friend bool operator==(const Symbol&, const Symbol&) = default;
};

}  // namespace msym
