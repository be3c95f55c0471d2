#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ivsmm/types.hpp"

namespace ivsmm {

// One analysis sample: outcome Y, exposure X and an integer instrument with
// levels relabelled to 0..K-1 in ascending numeric order of the raw values.
// Immutable after construction, safe to share across estimation tasks.
struct Dataset {
  Vector y;
  Vector x;
  IntVector z;
  int n_levels = 0;
  std::vector<double> level_values;  // raw value behind each relabelled level
  std::size_t dropped_rows = 0;      // rows removed for missing cells

  Index n() const { return y.size(); }
};

// Validates column lengths, relabels/validates the level range and fills
// level_values when not supplied.
Dataset make_dataset(Vector y, Vector x, IntVector z,
                     std::vector<double> level_values = {},
                     std::size_t dropped_rows = 0);

enum class InstrumentCoding {
  orthogonal_indicators,  // S = (1, I(Z=1), ..., I(Z=K-1))
  raw_multivalued,        // S = (1, Z)
};

struct InstrumentSpec {
  InstrumentCoding mode = InstrumentCoding::orthogonal_indicators;
  int reference_level = 0;  // level omitted from the indicator set
  std::vector<int> levels;  // distinct levels, ascending

  static InstrumentSpec for_dataset(
      const Dataset& ds,
      InstrumentCoding mode = InstrumentCoding::orthogonal_indicators);
};

/// Instrument matrix S (n x p); column 0 is the constant.
Matrix encode_indicators(const Dataset& ds, const InstrumentSpec& spec);

/// Pure indicator basis (n x K), one column per level, no constant.
/// Spans the same space as the constant-plus-indicators coding; the rows are
/// mutually exclusive so S S' = diag(S) holds column-wise.
Matrix indicator_basis(const Dataset& ds);

struct CollapseReport {
  std::vector<int> level_map;  // old level -> new level
  int levels_before = 0;
  int levels_after = 0;
  bool merged_any() const { return levels_after < levels_before; }
};

// Merges instrument levels whose level-mean predicted values agree within a
// relative tolerance; new labels follow ascending predicted means.
std::pair<Dataset, CollapseReport> collapse_equivalent_levels(
    const Dataset& ds, const Vector& predicted, double tol = 1e-9);

// Per-level empirical means shared by the estimator and the decompositions.
struct LevelStats {
  std::vector<Index> count;
  Vector prob;       // level share
  Vector mean_x;     // E(X | Z=l)
  Vector mean_y;     // E(Y | Z=l)
  Vector mean_yx;    // E(YX | Z=l)
  Vector mean_y_xm1; // E(Y(X-1) | Z=l)
};
LevelStats level_stats(const Dataset& ds);

}  // namespace ivsmm
