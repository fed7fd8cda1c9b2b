#pragma once

// Seeded random tiles and inputs for property-style tests.

#include <random>

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"

namespace testgen {

inline xbarsim::circuit::ConductanceTile random_tile(
    const xbarsim::circuit::CrossbarConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(cfg.g_min, cfg.g_max);
  Eigen::MatrixXd g(cfg.rows, cfg.cols);
  for (int j = 0; j < cfg.cols; ++j)
    for (int i = 0; i < cfg.rows; ++i) g(i, j) = dist(rng);
  return {cfg, std::move(g)};
}

inline Eigen::VectorXd random_input(const xbarsim::circuit::CrossbarConfig& cfg,
                                    std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, cfg.v_fs);
  Eigen::VectorXd v(cfg.rows);
  for (int i = 0; i < cfg.rows; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace testgen
