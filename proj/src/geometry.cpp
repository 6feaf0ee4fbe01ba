#include "msym/geometry.hpp"

#include <algorithm>

#include "msym/errors.hpp"
#include "msym/parser.hpp"

namespace msym {

const char* to_string(SpaceTag tag) {
  switch (tag) {
    case SpaceTag::jet: return "J1";
    case SpaceTag::restricted_momentum: return "J1*";
    case SpaceTag::extended_momentum: return "M";
    case SpaceTag::unified_w: return "W";
    case SpaceTag::unified_w0: return "W0";
    case SpaceTag::custom: return "custom";
  }
  return "?";
}

std::vector<Symbol> base_symbols(int m) {
  std::vector<Symbol> out;
  for (int nu = 1; nu <= m; ++nu) out.push_back(Symbol::x(nu));
  return out;
}

std::vector<Symbol> field_symbols(int n) {
  std::vector<Symbol> out;
  for (int a = 1; a <= n; ++a) out.push_back(Symbol::y(a));
  return out;
}

std::vector<Symbol> velocity_symbols(int m, int n) {
  std::vector<Symbol> out;
  for (int a = 1; a <= n; ++a)
    for (int nu = 1; nu <= m; ++nu) out.push_back(Symbol::v(a, nu));
  return out;
}

std::vector<Symbol> momentum_symbols(int m, int n) {
  std::vector<Symbol> out;
  for (int a = 1; a <= n; ++a)
    for (int nu = 1; nu <= m; ++nu) out.push_back(Symbol::p(a, nu));
  return out;
}

CoordinateSpace::CoordinateSpace(SpaceTag tag, int m, int n, std::vector<Symbol> coords)
    : tag_(tag), m_(m), n_(n), coords_(std::move(coords)) {
  for (std::size_t i = 0; i < coords_.size(); ++i) sorted_.emplace_back(coords_[i], i);
  std::sort(sorted_.begin(), sorted_.end());
  for (std::size_t i = 1; i < sorted_.size(); ++i) {
    if (sorted_[i].first == sorted_[i - 1].first) throw ModelError("duplicate coordinate " + sorted_[i].first.name());
  }
}

SpacePtr CoordinateSpace::make(SpaceTag tag, int m, int n) {
  if (m < 1 || n < 1) throw ModelError("bundle dimensions must be at least 1");
  std::vector<Symbol> c = base_symbols(m);
  auto append = [&c](const std::vector<Symbol>& more) { c.insert(c.end(), more.begin(), more.end()); };
  append(field_symbols(n));
  switch (tag) {
    case SpaceTag::jet: append(velocity_symbols(m, n)); break;
    case SpaceTag::restricted_momentum: append(momentum_symbols(m, n)); break;
    case SpaceTag::extended_momentum:
      append(momentum_symbols(m, n));
      c.push_back(Symbol::affine());
      break;
    case SpaceTag::unified_w:
      append(velocity_symbols(m, n));
      append(momentum_symbols(m, n));
      c.push_back(Symbol::affine());
      break;
    case SpaceTag::unified_w0:
      append(velocity_symbols(m, n));
      append(momentum_symbols(m, n));
      break;
    case SpaceTag::custom: throw ModelError("custom spaces need an explicit coordinate list");
  }
  return SpacePtr(new CoordinateSpace(tag, m, n, std::move(c)));
}

SpacePtr CoordinateSpace::make_custom(int m, int n, std::vector<Symbol> coordinates) {
  return SpacePtr(new CoordinateSpace(SpaceTag::custom, m, n, std::move(coordinates)));
}

std::optional<std::size_t> CoordinateSpace::index_of(const Symbol& s) const {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), s,
                             [](const std::pair<Symbol, std::size_t>& e, const Symbol& key) { return e.first < key; });
  if (it == sorted_.end() || !(it->first == s)) return std::nullopt;
  return it->second;
}

std::size_t CoordinateSpace::require(const Symbol& s) const {
  auto i = index_of(s);
  if (!i) throw SymbolError("symbol " + s.name() + " is not a coordinate of " + to_string(tag_));
  return *i;
}

FieldModel build_model(int m, int n, const Expression& lagrangian) {
  if (m < 1 || n < 1) throw ModelError("bundle dimensions must satisfy m >= 1 and n >= 1");
  for (const Symbol& s : lagrangian.free_symbols()) {
    switch (s.kind) {
      case SymbolKind::base:
        if (s.dir > m) throw SymbolError("index out of range in " + s.name());
        break;
      case SymbolKind::field:
        if (s.field > n) throw SymbolError("index out of range in " + s.name());
        break;
      case SymbolKind::velocity:
        if (s.field > n || s.dir > m) throw SymbolError("index out of range in " + s.name());
        break;
      case SymbolKind::momentum:
      case SymbolKind::affine_momentum:
        throw ModelError("momentum symbol " + s.name() + " in a Lagrangian");
      default: throw ModelError("symbol " + s.name() + " is not a jet coordinate");
    }
  }
  FieldModel model;
  model.m = m;
  model.n = n;
  model.lagrangian = lagrangian;
  model.source = lagrangian.to_string();
  return model;
}

FieldModel build_model(int m, int n, std::string_view lagrangian_text) {
  if (m < 1 || n < 1) throw ModelError("bundle dimensions must satisfy m >= 1 and n >= 1");
  FieldModel model = build_model(m, n, parse(lagrangian_text, SymbolRange{m, n}));
  model.source = std::string(lagrangian_text);
  return model;
}

}  // namespace msym
