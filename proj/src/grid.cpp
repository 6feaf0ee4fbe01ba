#include "msym/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "msym/errors.hpp"
#include "msym/symbol.hpp"

namespace msym {

SectionGrid::SectionGrid(int m, int n, std::vector<std::pair<double, double>> bounds, std::vector<int> resolution)
    : m_(m), n_(n), bounds_(std::move(bounds)), res_(std::move(resolution)) {
  if (m < 1 || n < 1) throw ModelError("grid dimensions must be at least 1");
  if (static_cast<int>(bounds_.size()) != m || static_cast<int>(res_.size()) != m) {
    throw ModelError("grid needs bounds and a resolution for every base axis");
  }
  for (int a = 0; a < m; ++a) {
    if (res_[a] < 2) throw ModelError("grid too small: fewer than 2 points on axis " + std::to_string(a + 1));
    if (!(bounds_[a].second > bounds_[a].first)) throw ModelError("empty grid interval on axis " + std::to_string(a + 1));
  }
  stride_.assign(m, 1);
  for (int a = m - 1; a >= 0; --a) {
    stride_[a] = count_;
    count_ *= static_cast<std::size_t>(res_[a]);
  }
  y_.assign(n, std::vector<double>(count_, 0.0));
}

SectionGrid SectionGrid::square(int m, int n, double lo, double hi, int points) {
  return SectionGrid(m, n, std::vector<std::pair<double, double>>(m, {lo, hi}), std::vector<int>(m, points));
}

double SectionGrid::spacing(int axis) const {
  return (bounds_[axis].second - bounds_[axis].first) / (res_[axis] - 1);
}

double SectionGrid::coordinate(int axis, int i) const {
  if (i == res_[axis] - 1) return bounds_[axis].second;
  return bounds_[axis].first + i * spacing(axis);
}

std::vector<int> SectionGrid::multi_index(std::size_t node) const {
  std::vector<int> idx(m_);
  for (int a = 0; a < m_; ++a) {
    idx[a] = static_cast<int>(node / stride_[a]);
    node %= stride_[a];
  }
  return idx;
}

std::size_t SectionGrid::node(const std::vector<int>& idx) const {
  std::size_t k = 0;
  for (int a = 0; a < m_; ++a) k += static_cast<std::size_t>(idx[a]) * stride_[a];
  return k;
}

std::vector<double> SectionGrid::position(std::size_t node) const {
  const auto idx = multi_index(node);
  std::vector<double> x(m_);
  for (int a = 0; a < m_; ++a) x[a] = coordinate(a, idx[a]);
  return x;
}

bool SectionGrid::is_boundary(std::size_t node) const {
  const auto idx = multi_index(node);
  for (int a = 0; a < m_; ++a) {
    if (idx[a] == 0 || idx[a] == res_[a] - 1) return true;
  }
  return false;
}

double SectionGrid::volume() const {
  double v = 1.0;
  for (const auto& [lo, hi] : bounds_) v *= hi - lo;
  return v;
}

void SectionGrid::enable_velocities() {
  if (v_.empty()) v_.assign(static_cast<std::size_t>(n_ * m_), std::vector<double>(count_, 0.0));
}

void SectionGrid::enable_momenta() {
  if (p_.empty()) p_.assign(static_cast<std::size_t>(n_ * m_), std::vector<double>(count_, 0.0));
}

void SectionGrid::fill_y(int a, const std::function<double(const std::vector<double>&)>& f) {
  auto& col = y(a);
  for (std::size_t k = 0; k < count_; ++k) col[k] = f(position(k));
}

Stencil derivative_stencil(const SectionGrid& g, std::size_t node, int axis) {
  auto idx = g.multi_index(node);
  const int i = idx[axis];
  const int n = g.resolution()[axis];
  const double h = g.spacing(axis);
  auto at = [&](int j) {
    idx[axis] = j;
    return g.node(idx);
  };
  if (n == 2) return {{at(1), 1.0 / h}, {at(0), -1.0 / h}};
  if (n == 3) {
    if (i == 0) return {{at(0), -1.5 / h}, {at(1), 2.0 / h}, {at(2), -0.5 / h}};
    if (i == 2) return {{at(2), 1.5 / h}, {at(1), -2.0 / h}, {at(0), 0.5 / h}};
  }
  // one-sided closure with the same leading error (h^2/6) f''' as the central
  // stencil, so differences of derived fields stay second order up to the edge
  if (i == 0) return {{at(0), -2.0 / h}, {at(1), 3.5 / h}, {at(2), -2.0 / h}, {at(3), 0.5 / h}};
  if (i == n - 1) return {{at(n - 1), 2.0 / h}, {at(n - 2), -3.5 / h}, {at(n - 3), 2.0 / h}, {at(n - 4), -0.5 / h}};
  return {{at(i + 1), 0.5 / h}, {at(i - 1), -0.5 / h}};
}

Stencil second_derivative_stencil(const SectionGrid& g, std::size_t node, int a, int b) {
  const auto idx = g.multi_index(node);
  auto at = [&](int da, int db) {
    auto k = idx;
    k[a] += da;
    k[b] += db;
    return g.node(k);
  };
  if (a == b) {
    const double h2 = g.spacing(a) * g.spacing(a);
    auto k1 = idx;
    auto k0 = idx;
    k1[a] += 1;
    k0[a] -= 1;
    return {{g.node(k1), 1.0 / h2}, {node, -2.0 / h2}, {g.node(k0), 1.0 / h2}};
  }
  const double w = 1.0 / (4.0 * g.spacing(a) * g.spacing(b));
  return {{at(1, 1), w}, {at(1, -1), -w}, {at(-1, 1), -w}, {at(-1, -1), w}};
}

double grid_derivative(const SectionGrid& g, const std::vector<double>& f, std::size_t node, int axis) {
  double s = 0.0;
  for (const auto& [k, w] : derivative_stencil(g, node, axis)) s += w * f[k];
  return s;
}

double grid_second_derivative(const SectionGrid& g, const std::vector<double>& f, std::size_t node, int a, int b) {
  double s = 0.0;
  for (const auto& [k, w] : second_derivative_stencil(g, node, a, b)) s += w * f[k];
  return s;
}

namespace {

std::vector<std::string> header_for(const SectionGrid& g) {
  std::vector<std::string> cols;
  for (int nu = 1; nu <= g.base_dim(); ++nu) cols.push_back(Symbol::x(nu).name());
  for (int a = 1; a <= g.fiber_dim(); ++a) cols.push_back(Symbol::y(a).name());
  if (g.has_velocities()) {
    for (int a = 1; a <= g.fiber_dim(); ++a)
      for (int nu = 1; nu <= g.base_dim(); ++nu) cols.push_back(Symbol::v(a, nu).name());
  }
  if (g.has_momenta()) {
    for (int a = 1; a <= g.fiber_dim(); ++a)
      for (int nu = 1; nu <= g.base_dim(); ++nu) cols.push_back(Symbol::p(a, nu).name());
  }
  return cols;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double to_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ModelError("CSV line " + std::to_string(line) + ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

void write_csv(const SectionGrid& g, std::ostream& out) {
  const auto cols = header_for(g);
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    std::vector<double> row = g.position(k);
    for (int a = 1; a <= g.fiber_dim(); ++a) row.push_back(g.y(a)[k]);
    if (g.has_velocities()) {
      for (int a = 1; a <= g.fiber_dim(); ++a)
        for (int nu = 1; nu <= g.base_dim(); ++nu) row.push_back(g.v(a, nu)[k]);
    }
    if (g.has_momenta()) {
      for (int a = 1; a <= g.fiber_dim(); ++a)
        for (int nu = 1; nu <= g.base_dim(); ++nu) row.push_back(g.p(a, nu)[k]);
    }
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

void write_csv_file(const SectionGrid& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_csv(g, out);
  if (!out) throw Error("failed writing " + path);
}

SectionGrid read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ModelError("empty CSV");
  const auto cols = split(line);
  int m = 0;
  int n = 0;
  int nv = 0;
  int np = 0;
  for (const auto& c : cols) {
    if (c.size() >= 2 && c[0] == 'x') {
      ++m;
    } else if (c.size() >= 2 && c[0] == 'y' && c.find('_') == std::string::npos) {
      ++n;
    } else if (c.size() >= 2 && c[0] == 'v') {
      ++nv;
    } else if (c.size() >= 2 && c[0] == 'p') {
      ++np;
    } else {
      throw ModelError("unknown CSV column '" + c + "'");
    }
  }
  if (m < 1 || n < 1) throw ModelError("CSV needs x and y columns");
  if ((nv && nv != n * m) || (np && np != n * m)) throw ModelError("CSV has an incomplete set of v or p columns");
  // verify the expected order
  std::vector<std::string> expected;
  for (int nu = 1; nu <= m; ++nu) expected.push_back(Symbol::x(nu).name());
  for (int a = 1; a <= n; ++a) expected.push_back(Symbol::y(a).name());
  if (nv)
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) expected.push_back(Symbol::v(a, nu).name());
  if (np)
    for (int a = 1; a <= n; ++a)
      for (int nu = 1; nu <= m; ++nu) expected.push_back(Symbol::p(a, nu).name());
  if (expected != cols) throw ModelError("CSV columns are not in the expected order");

  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != cols.size()) throw ModelError("CSV line " + std::to_string(lineno) + " has the wrong width");
    std::vector<double> r;
    for (const auto& c : cells) r.push_back(to_double(c, lineno));
    rows.push_back(std::move(r));
  }
  std::vector<std::pair<double, double>> bounds;
  std::vector<int> res;
  for (int a = 0; a < m; ++a) {
    std::vector<double> vals;
    for (const auto& r : rows) vals.push_back(r[a]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end(), [](double p, double q) { return std::fabs(p - q) < 1e-12 * (1 + std::fabs(p)); }),
               vals.end());
    bounds.emplace_back(vals.front(), vals.back());
    res.push_back(static_cast<int>(vals.size()));
  }
  SectionGrid g(m, n, bounds, res);
  if (rows.size() != g.node_count()) throw ModelError("CSV rows do not form a complete grid");
  if (nv) g.enable_velocities();
  if (np) g.enable_momenta();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const auto pos = g.position(k);
    for (int a = 0; a < m; ++a) {
      if (std::fabs(pos[a] - r[a]) > 1e-9 * (1.0 + std::fabs(pos[a]))) {
        throw ModelError("CSV line " + std::to_string(k + 2) + " is not on the expected uniform grid");
      }
    }
    std::size_t c = static_cast<std::size_t>(m);
    for (int a = 1; a <= n; ++a) g.y(a)[k] = r[c++];
    if (nv)
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) g.v(a, nu)[k] = r[c++];
    if (np)
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) g.p(a, nu)[k] = r[c++];
  }
  return g;
}

SectionGrid read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_csv(in);
}

}  // namespace msym
