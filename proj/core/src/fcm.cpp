#include "xbarsim/fcm.hpp"

#include <cmath>
#include <string>

#include "xbarsim/errors.hpp"
#include "ladder.hpp"

namespace xbarsim::circuit {

namespace detail {

namespace {

// Thomas algorithm for one row of top nodes: unknowns T(i, 0..C-1), bottom
// nodes fixed. The driver connects to T(i, 0) through r_source plus one row
// segment.
void solve_row_tridiag(const CrossbarConfig& cfg, const Eigen::MatrixXd& g, int i,
                       double v_drive, const Eigen::MatrixXd& v_bot,
                       Eigen::MatrixXd& v_top, Eigen::VectorXd& cw,
                       Eigen::VectorXd& dw) {
  const int C = cfg.cols;
  const double g_seg = 1.0 / cfg.r_row;
  const double g_drv = 1.0 / (cfg.r_source + cfg.r_row);

  // Forward elimination with normalized coefficients.
  double prev_c = 0.0, prev_d = 0.0;
  for (int j = 0; j < C; ++j) {
    const double gl = (j == 0) ? g_drv : g_seg;
    const double gr = (j < C - 1) ? g_seg : 0.0;
    const double diag = gl + gr + g(i, j);
    double rhs = g(i, j) * v_bot(i, j);
    if (j == 0) rhs += gl * v_drive;
    const double denom = diag - gl * prev_c;
    prev_c = gr / denom;
    prev_d = (rhs + gl * prev_d) / denom;
    cw[j] = prev_c;
    dw[j] = prev_d;
  }
  double x = dw[C - 1];
  v_top(i, C - 1) = x;
  for (int j = C - 2; j >= 0; --j) {
    x = dw[j] + cw[j] * x;
    v_top(i, j) = x;
  }
}

// One column of bottom nodes: unknowns B(0..R-1, j), top nodes fixed. The
// foot node B(R-1, j) drains to ground through one column segment plus
// r_sense.
void solve_col_tridiag(const CrossbarConfig& cfg, const Eigen::MatrixXd& g, int j,
                       const Eigen::MatrixXd& v_top, Eigen::MatrixXd& v_bot,
                       Eigen::VectorXd& cw, Eigen::VectorXd& dw) {
  const int R = cfg.rows;
  const double g_seg = 1.0 / cfg.r_col;
  const double g_foot = 1.0 / (cfg.r_col + cfg.r_sense);

  double prev_c = 0.0, prev_d = 0.0;
  for (int i = 0; i < R; ++i) {
    const double gu = (i > 0) ? g_seg : 0.0;
    const double gd = (i < R - 1) ? g_seg : g_foot;
    const double diag = gu + gd + g(i, j);
    const double rhs = g(i, j) * v_top(i, j);  // ground contributes 0
    const double denom = diag - gu * prev_c;
    prev_c = gd / denom;
    prev_d = (rhs + gu * prev_d) / denom;
    cw[i] = prev_c;
    dw[i] = prev_d;
  }
  double x = dw[R - 1];
  v_bot(R - 1, j) = x;
  for (int i = R - 2; i >= 0; --i) {
    x = dw[i] + cw[i] * x;
    v_bot(i, j) = x;
  }
}

// Rows collapsed to a single node each (r_row == 0).
void solve_row_collapsed(const CrossbarConfig& cfg, const Eigen::MatrixXd& g, int i,
                         double v_drive, const Eigen::MatrixXd& v_bot,
                         Eigen::MatrixXd& v_top) {
  if (cfg.r_source == 0.0) {
    v_top.row(i).setConstant(v_drive);
    return;
  }
  double num = v_drive / cfg.r_source;
  double den = 1.0 / cfg.r_source;
  for (int j = 0; j < cfg.cols; ++j) {
    num += g(i, j) * v_bot(i, j);
    den += g(i, j);
  }
  v_top.row(i).setConstant(num / den);
}

void solve_col_collapsed(const CrossbarConfig& cfg, const Eigen::MatrixXd& g, int j,
                         const Eigen::MatrixXd& v_top, Eigen::MatrixXd& v_bot) {
  if (cfg.r_sense == 0.0) {
    v_bot.col(j).setZero();
    return;
  }
  double num = 0.0;
  double den = 1.0 / cfg.r_sense;
  for (int i = 0; i < cfg.rows; ++i) {
    num += g(i, j) * v_top(i, j);
    den += g(i, j);
  }
  v_bot.col(j).setConstant(num / den);
}

}  // namespace

LadderResult solve_ladder(const ConductanceTile& tile, const Eigen::VectorXd& v_in,
                          double tol, int max_iter) {
  const CrossbarConfig& cfg = tile.config;
  const Eigen::MatrixXd& g = tile.g;
  const int R = cfg.rows, C = cfg.cols;

  LadderResult res;
  res.v_top = v_in.replicate(1, C);
  res.v_bot = Eigen::MatrixXd::Zero(R, C);

  Eigen::MatrixXd top_prev(R, C), bot_prev(R, C);
  Eigen::VectorXd cw(std::max(R, C)), dw(std::max(R, C));

  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    top_prev = res.v_top;
    bot_prev = res.v_bot;

    for (int i = 0; i < R; ++i) {
      if (cfg.r_row == 0.0)
        solve_row_collapsed(cfg, g, i, v_in[i], res.v_bot, res.v_top);
      else
        solve_row_tridiag(cfg, g, i, v_in[i], res.v_bot, res.v_top, cw, dw);
    }
    for (int j = 0; j < C; ++j) {
      if (cfg.r_col == 0.0)
        solve_col_collapsed(cfg, g, j, res.v_top, res.v_bot);
      else
        solve_col_tridiag(cfg, g, j, res.v_top, res.v_bot, cw, dw);
    }

    const double delta = std::max((res.v_top - top_prev).cwiseAbs().maxCoeff(),
                                  (res.v_bot - bot_prev).cwiseAbs().maxCoeff());
    res.sweeps = sweep;
    res.residual = delta / cfg.v_fs;
    if (res.residual <= tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace detail

namespace {

void validate_v_cal(const ConductanceTile& tile, const Eigen::VectorXd& v) {
  if (v.size() != tile.rows())
    throw std::invalid_argument("fcm_convert: v_cal length does not match tile rows");
  if (!v.allFinite() || (v.array() < 0.0).any() ||
      (v.array() > tile.config.v_fs).any())
    throw std::invalid_argument("fcm_convert: v_cal entries must lie in [0, v_fs]");
}

}  // namespace

ConductanceTile fcm_convert(const ConductanceTile& tile, const FcmOptions& opt) {
  const CrossbarConfig& cfg = tile.config;
  if (!(opt.tol > 0.0) || !std::isfinite(opt.tol))
    throw std::invalid_argument("fcm_convert: tol must be positive and finite");
  if (opt.max_iter < 1)
    throw std::invalid_argument("fcm_convert: max_iter must be >= 1");

  Eigen::VectorXd v_cal = opt.v_cal;
  if (v_cal.size() == 0)
    v_cal = Eigen::VectorXd::Constant(cfg.rows, cfg.v_fs);
  validate_v_cal(tile, v_cal);

  // No parasitic drops: conversion is the identity, exactly.
  if (cfg.r_row == 0.0 && cfg.r_col == 0.0 && cfg.r_source == 0.0 &&
      cfg.r_sense == 0.0)
    return tile;

  auto run = [&](const Eigen::VectorXd& v) {
    detail::LadderResult r = detail::solve_ladder(tile, v, opt.tol, opt.max_iter);
    if (!r.converged)
      throw ConvergenceError("fcm_convert: no fixed point after " +
                                 std::to_string(opt.max_iter) +
                                 " sweeps (residual " + std::to_string(r.residual) + ")",
                             r.residual, r.sweeps);
    return r;
  };

  detail::LadderResult sol = run(v_cal);

  Eigen::MatrixXd gn(cfg.rows, cfg.cols);
  for (int i = 0; i < cfg.rows; ++i) {
    if (v_cal[i] == 0.0) continue;  // filled from the fallback solve below
    for (int j = 0; j < cfg.cols; ++j) {
      const double gij = tile.g(i, j);
      double v_dev = sol.v_top(i, j) - sol.v_bot(i, j);
      double eff = gij * v_dev / v_cal[i];
      gn(i, j) = std::min(std::max(eff, 0.0), gij);
    }
  }

  if ((v_cal.array() == 0.0).any()) {
    Eigen::VectorXd v_fb = v_cal;
    for (int i = 0; i < cfg.rows; ++i)
      if (v_fb[i] == 0.0) v_fb[i] = cfg.v_fs;
    detail::LadderResult fb = run(v_fb);
    for (int i = 0; i < cfg.rows; ++i) {
      if (v_cal[i] != 0.0) continue;
      for (int j = 0; j < cfg.cols; ++j) {
        const double gij = tile.g(i, j);
        double eff = gij * (fb.v_top(i, j) - fb.v_bot(i, j)) / cfg.v_fs;
        gn(i, j) = std::min(std::max(eff, 0.0), gij);
      }
    }
  }

  return ConductanceTile(cfg, std::move(gn));
}

}  // namespace xbarsim::circuit
