#pragma once

// Independent reference implementations used only by tests. They are
// written from the textbook definitions, share no code with the library
// and favour obviousness over speed.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

inline double accuracy(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += pred[i] == gold[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

// Precision/recall route; nullopt when the class occurs in neither series.
inline std::optional<double> f1(const std::vector<std::string>& pred,
                                const std::vector<std::string>& gold, const std::string& label) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    bool p = pred[i] == label;
    bool g = gold[i] == label;
    if (p && g) tp += 1;
    if (p && !g) fp += 1;
    if (!p && g) fn += 1;
  }
  if (tp + fp + fn == 0) return std::nullopt;
  if (tp == 0) return 0.0;
  double precision = tp / (tp + fp);
  double recall = tp / (tp + fn);
  return 2 * precision * recall / (precision + recall);
}

struct KappaParts {
  double kappa;
  double observed;
  double expected;
};

// p_e as an explicit double sum over the label set.
inline KappaParts kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> labels(a.begin(), a.end());
  labels.insert(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  double po = 0;
  for (std::size_t i = 0; i < a.size(); ++i) po += a[i] == b[i] ? 1 : 0;
  po /= n;
  double pe = 0;
  for (const auto& l : labels) {
    double ca = 0, cb = 0;
    for (const auto& x : a) ca += x == l ? 1 : 0;
    for (const auto& y : b) cb += y == l ? 1 : 0;
    pe += (ca / n) * (cb / n);
  }
  if (pe == 1.0) return {1.0, po, pe};
  return {(po - pe) / (1 - pe), po, pe};
}

inline double mae(const std::vector<double>& p, const std::vector<double>& r) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - r[i]);
  return s / static_cast<double>(p.size());
}

// Least squares with intercept through the normal equations
// [1 X]^T [1 X] b = [1 X]^T y, solved by Gauss-Jordan with partial
// pivoting. Returns {intercept, coefficients...}. Full rank only.
inline std::vector<double> normal_equations(const std::vector<std::vector<double>>& x,
                                            const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t k = x.empty() ? 0 : x[0].size();
  const std::size_t m = k + 1;
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> row(m);
    row[0] = 1.0;
    for (std::size_t j = 0; j < k; ++j) row[j + 1] = x[r][j];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) a[i][j] += row[i] * row[j];
      a[i][m] += row[i] * y[r];
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < m; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    if (std::fabs(a[piv][c]) < 1e-300) throw std::runtime_error("singular normal equations");
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c) continue;
      double f = a[r][c] / a[c][c];
      for (std::size_t j = c; j <= m; ++j) a[r][j] -= f * a[c][j];
    }
  }
  std::vector<double> b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = a[i][m] / a[i][i];
  return b;
}

}  // namespace oracle
