#include "ivsmm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ivsmm/errors.hpp"

namespace ivsmm {

Dataset make_dataset(Vector y, Vector x, IntVector z,
                     std::vector<double> level_values,
                     std::size_t dropped_rows) {
  const Index n = y.size();
  if (x.size() != n || z.size() != n) {
    throw Error("make_dataset: column lengths differ");
  }
  if (n == 0) throw Error("make_dataset: empty dataset");
  if (!y.allFinite() || !x.allFinite()) {
    throw Error("make_dataset: non-finite outcome or exposure value");
  }
  std::vector<int> distinct(z.data(), z.data() + n);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  const bool contiguous = distinct.front() == 0 &&
                          distinct.back() == static_cast<int>(distinct.size()) - 1;
  if (!contiguous) {
    // Relabel to 0..K-1 preserving ascending order of the raw values.
    for (Index i = 0; i < n; ++i) {
      z[i] = static_cast<int>(
          std::lower_bound(distinct.begin(), distinct.end(), z[i]) -
          distinct.begin());
    }
    if (level_values.empty()) {
      level_values.assign(distinct.begin(), distinct.end());
    }
  }
  const int zmax = z.maxCoeff();
  Dataset ds;
  ds.y = std::move(y);
  ds.x = std::move(x);
  ds.z = std::move(z);
  ds.n_levels = zmax + 1;
  if (level_values.empty()) {
    level_values.resize(ds.n_levels);
    std::iota(level_values.begin(), level_values.end(), 0.0);
  }
  if (static_cast<int>(level_values.size()) != ds.n_levels) {
    throw Error("make_dataset: level_values size does not match level count");
  }
  ds.level_values = std::move(level_values);
  ds.dropped_rows = dropped_rows;
  return ds;
}

InstrumentSpec InstrumentSpec::for_dataset(const Dataset& ds,
                                           InstrumentCoding mode) {
  InstrumentSpec spec;
  spec.mode = mode;
  spec.reference_level = 0;
  spec.levels.resize(ds.n_levels);
  std::iota(spec.levels.begin(), spec.levels.end(), 0);
  return spec;
}

Matrix encode_indicators(const Dataset& ds, const InstrumentSpec& spec) {
  if (static_cast<int>(spec.levels.size()) != ds.n_levels) {
    throw Error("encode_indicators: spec levels do not match dataset");
  }
  const Index n = ds.n();
  if (spec.mode == InstrumentCoding::raw_multivalued) {
    Matrix s(n, 2);
    s.col(0).setOnes();
    s.col(1) = ds.z.cast<double>();
    return s;
  }
  const int k = ds.n_levels;
  Matrix s = Matrix::Zero(n, k);
  s.col(0).setOnes();
  int col = 1;
  std::vector<int> col_of(static_cast<std::size_t>(k), -1);
  for (int level : spec.levels) {
    if (level == spec.reference_level) continue;
    col_of[static_cast<std::size_t>(level)] = col++;
  }
  for (Index i = 0; i < n; ++i) {
    const int c = col_of[static_cast<std::size_t>(ds.z[i])];
    if (c >= 0) s(i, c) = 1.0;
  }
  return s;
}

Matrix indicator_basis(const Dataset& ds) {
  Matrix s = Matrix::Zero(ds.n(), ds.n_levels);
  for (Index i = 0; i < ds.n(); ++i) s(i, ds.z[i]) = 1.0;
  return s;
}

std::pair<Dataset, CollapseReport> collapse_equivalent_levels(
    const Dataset& ds, const Vector& predicted, double tol) {
  if (predicted.size() != ds.n()) {
    throw Error("collapse_equivalent_levels: predicted length mismatch");
  }
  const int k = ds.n_levels;
  Vector mean = Vector::Zero(k);
  Vector count = Vector::Zero(k);
  for (Index i = 0; i < ds.n(); ++i) {
    mean[ds.z[i]] += predicted[i];
    count[ds.z[i]] += 1.0;
  }
  mean.array() /= count.array();

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return mean[a] < mean[b]; });

  // Group consecutive sorted means within the relative tolerance.
  CollapseReport report;
  report.levels_before = k;
  report.level_map.assign(static_cast<std::size_t>(k), -1);
  int group = -1;
  double group_anchor = 0.0;
  for (int idx : order) {
    const double m = mean[idx];
    const double scale = std::max({1.0, std::abs(m), std::abs(group_anchor)});
    if (group < 0 || std::abs(m - group_anchor) > tol * scale) {
      ++group;
      group_anchor = m;
    }
    report.level_map[static_cast<std::size_t>(idx)] = group;
  }
  report.levels_after = group + 1;

  IntVector z(ds.n());
  for (Index i = 0; i < ds.n(); ++i) {
    z[i] = report.level_map[static_cast<std::size_t>(ds.z[i])];
  }
  std::vector<double> values(static_cast<std::size_t>(report.levels_after));
  for (int old = 0; old < k; ++old) {
    values[static_cast<std::size_t>(report.level_map[old])] =
        static_cast<double>(report.level_map[old]);
  }
  Dataset merged =
      make_dataset(ds.y, ds.x, std::move(z), std::move(values),
                   ds.dropped_rows);
  return {std::move(merged), std::move(report)};
}

LevelStats level_stats(const Dataset& ds) {
  const int k = ds.n_levels;
  LevelStats st;
  st.count.assign(static_cast<std::size_t>(k), 0);
  st.prob = Vector::Zero(k);
  st.mean_x = Vector::Zero(k);
  st.mean_y = Vector::Zero(k);
  st.mean_yx = Vector::Zero(k);
  st.mean_y_xm1 = Vector::Zero(k);
  for (Index i = 0; i < ds.n(); ++i) {
    const int l = ds.z[i];
    ++st.count[static_cast<std::size_t>(l)];
    st.mean_x[l] += ds.x[i];
    st.mean_y[l] += ds.y[i];
    st.mean_yx[l] += ds.y[i] * ds.x[i];
    st.mean_y_xm1[l] += ds.y[i] * (ds.x[i] - 1.0);
  }
  for (int l = 0; l < k; ++l) {
    const double c = static_cast<double>(st.count[static_cast<std::size_t>(l)]);
    st.prob[l] = c / static_cast<double>(ds.n());
    if (c > 0) {
      st.mean_x[l] /= c;
      st.mean_y[l] /= c;
      st.mean_yx[l] /= c;
      st.mean_y_xm1[l] /= c;
    }
  }
  return st;
}

}  // namespace ivsmm
