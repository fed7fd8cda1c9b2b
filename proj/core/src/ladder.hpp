#pragma once

// Internal: alternating row/column ladder relaxation shared by fcm_convert
// and the iterative path of solve_nodal_oracle. Not installed.

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"

namespace xbarsim::circuit::detail {

struct LadderResult {
  Eigen::MatrixXd v_top;
  Eigen::MatrixXd v_bot;
  int sweeps = 0;
  double residual = 0.0;  // last max node-voltage change, relative to v_fs
  bool converged = false;
};

// Block Gauss-Seidel over the two ladder families: each sweep solves every
// row system exactly (tridiagonal in the top nodes, bottom nodes held fixed)
// and then every column system exactly (tridiagonal in the bottom nodes).
// The coupling between the families is the device conductances, which are
// small against the wire conductances in any physical configuration, so the
// fixed point is reached in a handful of sweeps.
LadderResult solve_ladder(const ConductanceTile& tile, const Eigen::VectorXd& v_in,
                          double tol, int max_iter);

}  // namespace xbarsim::circuit::detail
