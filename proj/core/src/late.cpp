#include "ivsmm/late.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ivsmm/errors.hpp"

namespace ivsmm {

namespace {

struct SortedLevels {
  std::vector<int> order;  // dataset level ids, E(X|Z) ascending
  Vector prob, mean_x, mean_y, mean_yx, mean_y_xm1;
  bool strict = true;
};

SortedLevels sorted_levels(const Dataset& ds) {
  if (ds.n_levels < 2) {
    throw DegenerateInstrumentError("decomposition needs at least 2 levels");
  }
  const LevelStats st = level_stats(ds);
  SortedLevels out;
  out.order.resize(static_cast<std::size_t>(ds.n_levels));
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](int a, int b) { return st.mean_x[a] < st.mean_x[b]; });
  const int k = ds.n_levels;
  out.prob.resize(k);
  out.mean_x.resize(k);
  out.mean_y.resize(k);
  out.mean_yx.resize(k);
  out.mean_y_xm1.resize(k);
  for (int l = 0; l < k; ++l) {
    const int src = out.order[static_cast<std::size_t>(l)];
    out.prob[l] = st.prob[src];
    out.mean_x[l] = st.mean_x[src];
    out.mean_y[l] = st.mean_y[src];
    out.mean_yx[l] = st.mean_yx[src];
    out.mean_y_xm1[l] = st.mean_y_xm1[src];
  }
  for (int l = 1; l < k; ++l) {
    if (out.mean_x[l] - out.mean_x[l - 1] < 1e-12) {
      out.strict = false;
      throw DegenerateIncrementError(
          "levels " + std::to_string(l - 1) + " and " + std::to_string(l) +
              " have (numerically) equal E(X|Z); merge them first",
          l);
    }
  }
  return out;
}

// Adjacent ratios of increments of `num` over increments of `den`.
Vector adjacent_ratios(const Vector& num, const Vector& den,
                       const char* what) {
  const Index k = num.size();
  Vector out(k - 1);
  for (Index l = 1; l < k; ++l) {
    const double d = den[l] - den[l - 1];
    if (std::abs(d) < 1e-12) {
      throw DegenerateIncrementError(
          std::string(what) + ": zero denominator increment at step " +
              std::to_string(l),
          static_cast<int>(l));
    }
    out[l - 1] = (num[l] - num[l - 1]) / d;
  }
  return out;
}

// mu-type weights on an arbitrary "exposure" scale e_l:
// mu_k = (e_k - e_{k-1}) * sum_{l>=k} (e_l - ebar) pi_l
//        / sum_l e_l (e_l - ebar) pi_l.
Vector mu_type_weights(const Vector& e, const Vector& prob) {
  const Index k = e.size();
  const double ebar = e.dot(prob);
  double denom = 0.0;
  for (Index l = 0; l < k; ++l) denom += e[l] * (e[l] - ebar) * prob[l];
  Vector tails(k);  // sum_{l>=k} (e_l - ebar) pi_l
  double acc = 0.0;
  for (Index l = k - 1; l >= 0; --l) {
    acc += (e[l] - ebar) * prob[l];
    tails[l] = acc;
  }
  Vector w(k - 1);
  for (Index j = 1; j < k; ++j) {
    w[j - 1] = (e[j] - e[j - 1]) * tails[j] / denom;
  }
  return w;
}

void flag_weights(LateDecomposition& d) {
  d.weights_in_unit_interval =
      (d.weights.array() >= -1e-12).all() &&
      (d.weights.array() <= 1.0 + 1e-12).all();
}

void require_binary(const Dataset& ds, const char* what) {
  if (!is_binary01(ds.x) || !is_binary01(ds.y)) {
    throw Error(std::string(what) + " requires binary 0/1 exposure and outcome");
  }
}

}  // namespace

Vector adjacent_wald(const Dataset& ds) {
  const SortedLevels s = sorted_levels(ds);
  return adjacent_ratios(s.mean_y, s.mean_x, "adjacent Wald");
}

Vector wald_from_base(const Dataset& ds) {
  const SortedLevels s = sorted_levels(ds);
  const Index k = s.mean_x.size();
  Vector out(k - 1);
  for (Index l = 1; l < k; ++l) {
    const double d = s.mean_x[l] - s.mean_x[0];
    if (std::abs(d) < 1e-12) {
      throw DegenerateIncrementError("zero base increment",
                                     static_cast<int>(l));
    }
    out[l - 1] = (s.mean_y[l] - s.mean_y[0]) / d;
  }
  return out;
}

Vector mu_weights(const Dataset& ds) {
  const SortedLevels s = sorted_levels(ds);
  return mu_type_weights(s.mean_x, s.prob);
}

LambdaWeights lambda_weights(const Dataset& ds) {
  const SortedLevels s = sorted_levels(ds);
  const Index k = s.mean_x.size();
  const double xbar = s.mean_x.dot(s.prob);
  double denom = 0.0;
  for (Index l = 0; l < k; ++l) {
    denom += s.mean_x[l] * (s.mean_x[l] - xbar) * s.prob[l];
  }
  LambdaWeights out;
  out.weights.resize(k - 1);
  for (Index j = 1; j < k; ++j) {
    out.weights[j - 1] = (s.mean_x[j] - s.mean_x[0]) *
                         (s.mean_x[j] - xbar) * s.prob[j] / denom;
  }
  out.valid_average = s.mean_x[1] > xbar;
  return out;
}

LateDecomposition late_decomposition(const Dataset& ds) {
  const SortedLevels s = sorted_levels(ds);
  LateDecomposition d;
  d.form = DecompositionForm::late;
  d.level_order = s.order;
  d.level_probs = s.prob;
  d.mean_x = s.mean_x;
  d.adjacent = adjacent_ratios(s.mean_y, s.mean_x, "adjacent Wald");
  d.weights = mu_type_weights(s.mean_x, s.prob);
  d.weighted_average = d.weights.dot(d.adjacent);
  d.monotonicity_ok = s.strict;
  flag_weights(d);
  d.positivity_ok = d.weights_in_unit_interval;
  return d;
}

LateDecomposition lrr_decomposition(const Dataset& ds) {
  require_binary(ds, "risk-ratio decomposition");
  const SortedLevels s = sorted_levels(ds);
  LateDecomposition d;
  d.form = DecompositionForm::lrr;
  d.level_order = s.order;
  d.level_probs = s.prob;
  d.mean_x = s.mean_x;
  d.adjacent = adjacent_ratios(s.mean_yx, s.mean_y_xm1, "local risk ratio");

  // tau_k = {E(Y(X-1)|k) - E(Y(X-1)|k-1)} * sum_{l>=k} (a_l - abar) pi_l
  //         / sum_l E(Y(X-1)|l) (a_l - abar) pi_l,   a_l = E(YX|Z=l).
  const Index k = s.mean_yx.size();
  const double abar = s.mean_yx.dot(s.prob);
  double denom = 0.0;
  for (Index l = 0; l < k; ++l) {
    denom += s.mean_y_xm1[l] * (s.mean_yx[l] - abar) * s.prob[l];
  }
  Vector tails(k);
  double acc = 0.0;
  for (Index l = k - 1; l >= 0; --l) {
    acc += (s.mean_yx[l] - abar) * s.prob[l];
    tails[l] = acc;
  }
  d.weights.resize(k - 1);
  for (Index j = 1; j < k; ++j) {
    d.weights[j - 1] =
        (s.mean_y_xm1[j] - s.mean_y_xm1[j - 1]) * tails[j] / denom;
  }
  d.weighted_average = d.weights.dot(d.adjacent);
  flag_weights(d);
  bool pos = true;
  for (Index l = 1; l < k; ++l) {
    pos = pos && (s.mean_yx[l] > s.mean_yx[l - 1]) &&
          (s.mean_y_xm1[l] > s.mean_y_xm1[l - 1]);
  }
  d.positivity_ok = pos;
  d.monotonicity_ok = s.strict && pos;
  return d;
}

LateDecomposition ilrr_decomposition(const Dataset& ds) {
  require_binary(ds, "inverse risk-ratio decomposition");
  const SortedLevels s = sorted_levels(ds);
  LateDecomposition d;
  d.form = DecompositionForm::ilrr;
  d.level_order = s.order;
  d.level_probs = s.prob;
  d.mean_x = s.mean_x;
  d.adjacent = adjacent_ratios(s.mean_y_xm1, s.mean_yx, "inverse risk ratio");
  d.weights = mu_type_weights(s.mean_yx, s.prob);
  d.weighted_average = d.weights.dot(d.adjacent);
  flag_weights(d);
  bool pos = true;
  const Index k = s.mean_yx.size();
  for (Index l = 1; l < k; ++l) {
    pos = pos && (s.mean_yx[l] > s.mean_yx[l - 1]);
  }
  d.positivity_ok = pos;
  d.monotonicity_ok = s.strict && pos;
  return d;
}

}  // namespace ivsmm
