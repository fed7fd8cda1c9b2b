#include "xbarsim/nodal.hpp"

#include <Eigen/Cholesky>

#include <vector>

#include "xbarsim/errors.hpp"
#include "ladder.hpp"

namespace xbarsim::circuit {

namespace {

constexpr int kDenseLimit = 32;     // dense direct solve up to 32x32 tiles
constexpr double kIterTol = 1e-10;  // relaxation tolerance above that
constexpr int kIterMax = 50000;

Eigen::VectorXd column_currents(const ConductanceTile& tile,
                                const Eigen::MatrixXd& v_top,
                                const Eigen::MatrixXd& v_bot) {
  Eigen::VectorXd i_col(tile.cols());
  for (int j = 0; j < tile.cols(); ++j) {
    double acc = 0.0;
    for (int i = 0; i < tile.rows(); ++i)
      acc += tile.g(i, j) * (v_top(i, j) - v_bot(i, j));
    i_col[j] = acc;
  }
  return i_col;
}

// Node handle: either a solver unknown or a fixed potential. Zero-resistance
// wire segments are eliminated before assembly by collapsing the affected
// chain onto a supernode (or onto the driver / ground when the terminal
// resistance is zero too), which keeps the all-parasitics-zero cases exact.
struct Node {
  int index = -1;     // >= 0: unknown
  double value = 0.0; // used when index < 0
  bool fixed() const { return index < 0; }
};

NodalSolution solve_dense(const ConductanceTile& tile, const Eigen::VectorXd& v_in) {
  const CrossbarConfig& cfg = tile.config;
  const int R = cfg.rows, C = cfg.cols;

  const bool rows_chain = cfg.r_row > 0.0;
  const bool rows_super = !rows_chain && cfg.r_source > 0.0;
  const bool cols_chain = cfg.r_col > 0.0;
  const bool cols_super = !cols_chain && cfg.r_sense > 0.0;

  int n = 0;
  std::vector<int> row_super(R, -1), col_super(C, -1);
  Eigen::MatrixXi top_idx, bot_idx;
  if (rows_chain) {
    top_idx.resize(R, C);
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) top_idx(i, j) = n++;
  } else if (rows_super) {
    for (int i = 0; i < R; ++i) row_super[i] = n++;
  }
  if (cols_chain) {
    bot_idx.resize(R, C);
    for (int i = 0; i < R; ++i)
      for (int j = 0; j < C; ++j) bot_idx(i, j) = n++;
  } else if (cols_super) {
    for (int j = 0; j < C; ++j) col_super[j] = n++;
  }

  auto top = [&](int i, int j) -> Node {
    if (rows_chain) return {top_idx(i, j), 0.0};
    if (rows_super) return {row_super[i], 0.0};
    return {-1, v_in[i]};
  };
  auto bot = [&](int i, int j) -> Node {
    if (cols_chain) return {bot_idx(i, j), 0.0};
    if (cols_super) return {col_super[j], 0.0};
    return {-1, 0.0};
  };

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  auto stamp = [&](Node a, Node c, double gamma) {
    if (gamma == 0.0) return;
    if (!a.fixed() && !c.fixed()) {
      if (a.index == c.index) return;
      A(a.index, a.index) += gamma;
      A(c.index, c.index) += gamma;
      A(a.index, c.index) -= gamma;
      A(c.index, a.index) -= gamma;
    } else if (!a.fixed()) {
      A(a.index, a.index) += gamma;
      b[a.index] += gamma * c.value;
    } else if (!c.fixed()) {
      A(c.index, c.index) += gamma;
      b[c.index] += gamma * a.value;
    }
  };

  // Devices.
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) stamp(top(i, j), bot(i, j), tile.g(i, j));
  // Row wires and drivers.
  if (rows_chain) {
    for (int i = 0; i < R; ++i) {
      stamp({-1, v_in[i]}, top(i, 0), 1.0 / (cfg.r_source + cfg.r_row));
      for (int j = 0; j + 1 < C; ++j)
        stamp(top(i, j), top(i, j + 1), 1.0 / cfg.r_row);
    }
  } else if (rows_super) {
    for (int i = 0; i < R; ++i)
      stamp({-1, v_in[i]}, {row_super[i], 0.0}, 1.0 / cfg.r_source);
  }
  // Column wires and sense feet.
  if (cols_chain) {
    for (int j = 0; j < C; ++j) {
      for (int i = 0; i + 1 < R; ++i)
        stamp(bot(i, j), bot(i + 1, j), 1.0 / cfg.r_col);
      stamp(bot(R - 1, j), {-1, 0.0}, 1.0 / (cfg.r_col + cfg.r_sense));
    }
  } else if (cols_super) {
    for (int j = 0; j < C; ++j)
      stamp({col_super[j], 0.0}, {-1, 0.0}, 1.0 / cfg.r_sense);
  }

  Eigen::VectorXd x;
  if (n > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
      throw DegenerateCircuitError("solve_nodal_oracle: singular nodal system");
    x = llt.solve(b);
    if (!x.allFinite())
      throw DegenerateCircuitError("solve_nodal_oracle: non-finite nodal solution");
  }

  NodalSolution sol;
  sol.v_top.resize(R, C);
  sol.v_bot.resize(R, C);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < C; ++j) {
      Node t = top(i, j), c = bot(i, j);
      sol.v_top(i, j) = t.fixed() ? t.value : x[t.index];
      sol.v_bot(i, j) = c.fixed() ? c.value : x[c.index];
    }
  sol.i_col = column_currents(tile, sol.v_top, sol.v_bot);
  return sol;
}

}  // namespace

NodalSolution solve_nodal_oracle(const ConductanceTile& tile,
                                 const Eigen::VectorXd& v_in) {
  const CrossbarConfig& cfg = tile.config;
  if (v_in.size() != cfg.rows)
    throw std::invalid_argument("solve_nodal_oracle: v_in length does not match rows");
  if (!v_in.allFinite() || (v_in.array() < 0.0).any() ||
      (v_in.array() > cfg.v_fs).any())
    throw std::invalid_argument("solve_nodal_oracle: v_in entries must lie in [0, v_fs]");

  const bool no_parasitics = cfg.r_row == 0.0 && cfg.r_col == 0.0 &&
                             cfg.r_source == 0.0 && cfg.r_sense == 0.0;
  if (no_parasitics && (tile.g.array() == 0.0).all())
    throw DegenerateCircuitError(
        "solve_nodal_oracle: all conductances zero with zero parasitics");

  if (cfg.rows <= kDenseLimit && cfg.cols <= kDenseLimit)
    return solve_dense(tile, v_in);

  detail::LadderResult r = detail::solve_ladder(tile, v_in, kIterTol, kIterMax);
  if (!r.converged)
    throw ConvergenceError("solve_nodal_oracle: relaxation did not converge",
                           r.residual, r.sweeps);
  NodalSolution sol;
  sol.v_top = std::move(r.v_top);
  sol.v_bot = std::move(r.v_bot);
  sol.i_col = column_currents(tile, sol.v_top, sol.v_bot);
  return sol;
}

}  // namespace xbarsim::circuit
