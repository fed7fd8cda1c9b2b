#pragma once

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"

namespace xbarsim::circuit {

struct FcmOptions {
  /// Calibration input; empty means all rows driven at v_fs. Full-scale
  /// excitation maximizes parasitic drops, so the converted matrix is
  /// worst-case consistent when reused for arbitrary inputs.
  Eigen::VectorXd v_cal;
  double tol = 1e-6;  // relative to v_fs, on node voltages
  int max_iter = 1000;
};

/// Fast crossbar model: converts an ideal conductance tile to a non-ideal
/// one by alternating row-ladder and column-ladder tridiagonal solves
/// (Gauss-Seidel over the two families) iterated to a fixed point. The
/// result satisfies G_nonideal^T * v_cal == oracle column currents at the
/// calibration input, to the requested tolerance.
///
/// Rows with v_cal[i] == 0 cannot be calibrated by division; their entries
/// take the distortion from a fallback solve in which every zero entry of
/// v_cal is replaced by v_fs.
ConductanceTile fcm_convert(const ConductanceTile& tile, const FcmOptions& opt = {});

}  // namespace xbarsim::circuit
