#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace msym {

/// Discretized section over a rectangular box, node-collocated. Nodes are
/// stored row-major with x1 the slowest axis. Components per node:
/// y^A, optionally v^A_nu and p^nu_A (both A-major, then nu).
class SectionGrid {
 public:
  SectionGrid(int m, int n, std::vector<std::pair<double, double>> bounds, std::vector<int> resolution);

  /// Square grid with N points per axis on the same interval.
  static SectionGrid square(int m, int n, double lo, double hi, int points);

  int base_dim() const { return m_; }
  int fiber_dim() const { return n_; }
  const std::vector<std::pair<double, double>>& bounds() const { return bounds_; }
  const std::vector<int>& resolution() const { return res_; }
  std::size_t node_count() const { return count_; }

  double spacing(int axis) const;  // axis is 0-based
  double coordinate(int axis, int i) const;
  std::vector<int> multi_index(std::size_t node) const;
  std::size_t node(const std::vector<int>& idx) const;
  std::vector<double> position(std::size_t node) const;
  bool is_boundary(std::size_t node) const;
  /// Product of the box side lengths.
  double volume() const;

  std::vector<double>& y(int a) { return y_.at(static_cast<std::size_t>(a - 1)); }
  const std::vector<double>& y(int a) const { return y_.at(static_cast<std::size_t>(a - 1)); }

  bool has_velocities() const { return !v_.empty(); }
  bool has_momenta() const { return !p_.empty(); }
  void enable_velocities();
  void enable_momenta();
  void drop_velocities() { v_.clear(); }
  void drop_momenta() { p_.clear(); }
  std::vector<double>& v(int a, int nu) { return v_.at(component(a, nu)); }
  const std::vector<double>& v(int a, int nu) const { return v_.at(component(a, nu)); }
  std::vector<double>& p(int a, int nu) { return p_.at(component(a, nu)); }
  const std::vector<double>& p(int a, int nu) const { return p_.at(component(a, nu)); }

  /// Fills y from a function of the node position.
  void fill_y(int a, const std::function<double(const std::vector<double>&)>& f);

 private:
  std::size_t component(int a, int nu) const {
    return static_cast<std::size_t>((a - 1) * m_ + (nu - 1));
  }

  int m_;
  int n_;
  std::vector<std::pair<double, double>> bounds_;
  std::vector<int> res_;
  std::vector<std::size_t> stride_;
  std::size_t count_ = 1;
  std::vector<std::vector<double>> y_;
  std::vector<std::vector<double>> v_;
  std::vector<std::vector<double>> p_;
};

/// Node weights of a finite-difference stencil.
using Stencil = std::vector<std::pair<std::size_t, double>>;

/// Weights used by grid_derivative and grid_second_derivative.
Stencil derivative_stencil(const SectionGrid& g, std::size_t node, int axis);
Stencil second_derivative_stencil(const SectionGrid& g, std::size_t node, int a, int b);

/// First derivative of nodal values along `axis`: central in the interior.
/// At the boundary a 4-point one-sided stencil whose leading error term
/// matches the central one (3 points: standard second order; 2 points:
/// first order).
double grid_derivative(const SectionGrid& g, const std::vector<double>& f, std::size_t node, int axis);

/// Second derivative d^2 f / dx^a dx^b at an interior node by central
/// differences.
double grid_second_derivative(const SectionGrid& g, const std::vector<double>& f, std::size_t node, int a, int b);

/// CSV with header `x1,x2,y1[,v1_1,...][,p1_1,...]`, 17 significant digits.
void write_csv(const SectionGrid& g, std::ostream& out);
void write_csv_file(const SectionGrid& g, const std::string& path);

/// Reads a CSV written by write_csv. The grid is reconstructed from the
/// distinct coordinate values per axis (which must form a uniform grid).
SectionGrid read_csv(std::istream& in);
SectionGrid read_csv_file(const std::string& path);

}  // namespace msym
