#pragma once

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"

namespace xbarsim::circuit {

/// Exact solution of the full parasitic network: KCL at every top node
/// (driver through r_source, adjacent row segments through r_row, device
/// branch) and every bottom node (adjacent column segments through r_col,
/// ground through r_sense at the column foot).
///
/// Tiles up to 32x32 are solved with a dense direct factorization; larger
/// tiles fall back to the ladder relaxation iterated to 1e-10 to bound
/// memory. Zero-resistance segments are eliminated exactly (nodes collapse
/// onto the driver / ground), so the all-parasitics-zero case returns
/// v_top = v_in, v_bot = 0 bit-exactly.
NodalSolution solve_nodal_oracle(const ConductanceTile& tile,
                                 const Eigen::VectorXd& v_in);

}  // namespace xbarsim::circuit
