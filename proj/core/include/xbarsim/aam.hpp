#pragma once

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"

namespace xbarsim::circuit {

/// Approximate analytical model: effective conductance of each device along
/// its direct current path only,
///
///   G[i][j] = 1 / (1/g[i][j] + r_source + (j+1)*r_row + (rows-i)*r_col + r_sense)
///
/// Input-independent and deterministic. Accurate when device resistance is
/// much larger than the wire resistances; see fcm_convert for the regime
/// where the ignored longer paths matter.
ConductanceTile aam_convert(const ConductanceTile& tile);

/// AAM with the per-geometry path resistance matrix precomputed, for
/// repeated conversions of tiles that share a config.
class AamModel {
 public:
  explicit AamModel(const CrossbarConfig& cfg);

  ConductanceTile convert(const ConductanceTile& tile) const;

  const Eigen::MatrixXd& path_resistance() const { return r_path_; }

 private:
  CrossbarConfig cfg_;
  Eigen::MatrixXd r_path_;
};

}  // namespace xbarsim::circuit
