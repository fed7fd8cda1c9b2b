#pragma once

#include <Eigen/Dense>

#include "xbarsim/errors.hpp"

namespace xbarsim::circuit {

/// Geometry and parasitic/device parameters of one crossbar tile.
///
/// Orientation convention used throughout: row drivers sit on the left edge,
/// sense amplifiers at the foot of each column. The device at (i, j) is
/// reached from its driver through r_source plus (j+1) row-wire segments and
/// drains to the sense node through (rows - i) column-wire segments plus
/// r_sense (rows indexed from 0 at the top, columns from 0 at the driver
/// side).
struct CrossbarConfig {
  int rows = 64;
  int cols = 64;
  double r_row = 1.0;     // ohms per row-wire cell segment
  double r_col = 4.6;     // ohms per column-wire cell segment
  double r_source = 0.0;  // ohms per row driver
  double r_sense = 0.0;   // ohms per column sense node
  double g_min = 1e-6;    // siemens
  double g_max = 1e-5;    // siemens
  double v_fs = 1.0;      // volts, full-scale input

  double on_off_ratio() const { return g_max / g_min; }

  void validate() const {
    if (rows < 1 || cols < 1)
      throw std::invalid_argument("CrossbarConfig: rows and cols must be >= 1");
    if (r_row < 0 || r_col < 0 || r_source < 0 || r_sense < 0)
      throw std::invalid_argument("CrossbarConfig: resistances must be >= 0");
    if (!(g_min > 0) || !(g_max > g_min))
      throw std::invalid_argument("CrossbarConfig: need 0 < g_min < g_max");
    if (!(v_fs > 0))
      throw std::invalid_argument("CrossbarConfig: v_fs must be > 0");
  }
};

/// A rows x cols matrix of device conductances tied to a tile geometry.
/// Ideal tiles hold entries in [g_min, g_max]; non-ideal (converted) tiles
/// relax the lower bound to (0, g_max] since parasitics only shrink the
/// effective conductance.
struct ConductanceTile {
  CrossbarConfig config;
  Eigen::MatrixXd g;

  ConductanceTile(CrossbarConfig cfg, Eigen::MatrixXd conductances)
      : config(std::move(cfg)), g(std::move(conductances)) {
    config.validate();
    if (g.rows() != config.rows || g.cols() != config.cols)
      throw std::invalid_argument("ConductanceTile: matrix does not match config dims");
    if (!g.allFinite() || (g.array() < 0.0).any())
      throw std::invalid_argument("ConductanceTile: conductances must be finite and >= 0");
  }

  int rows() const { return config.rows; }
  int cols() const { return config.cols; }
};

/// Node voltages and column currents of a solved tile. v_top[i][j] is the
/// row-wire node at cross-point (i, j), v_bot[i][j] the column-wire node.
struct NodalSolution {
  Eigen::MatrixXd v_top;
  Eigen::MatrixXd v_bot;
  Eigen::VectorXd i_col;
};

}  // namespace xbarsim::circuit
