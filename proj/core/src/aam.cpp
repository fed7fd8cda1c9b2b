#include "xbarsim/aam.hpp"

namespace xbarsim::circuit {

AamModel::AamModel(const CrossbarConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  r_path_.resize(cfg_.rows, cfg_.cols);
  for (int i = 0; i < cfg_.rows; ++i)
    for (int j = 0; j < cfg_.cols; ++j)
      r_path_(i, j) = cfg_.r_source + (j + 1) * cfg_.r_row +
                      (cfg_.rows - i) * cfg_.r_col + cfg_.r_sense;
}

ConductanceTile AamModel::convert(const ConductanceTile& tile) const {
  if (tile.rows() != cfg_.rows || tile.cols() != cfg_.cols)
    throw std::invalid_argument("AamModel: tile dims do not match model geometry");
  Eigen::MatrixXd gn(cfg_.rows, cfg_.cols);
  for (int j = 0; j < cfg_.cols; ++j)
    for (int i = 0; i < cfg_.rows; ++i) {
      const double g = tile.g(i, j);
      const double rp = r_path_(i, j);
      if (g == 0.0) {
        gn(i, j) = 0.0;
      } else if (rp == 0.0) {
        gn(i, j) = g;  // no parasitics: identity, exactly
      } else {
        gn(i, j) = 1.0 / (1.0 / g + rp);
      }
    }
  return ConductanceTile(tile.config, std::move(gn));
}

ConductanceTile aam_convert(const ConductanceTile& tile) {
  return AamModel(tile.config).convert(tile);
}

}  // namespace xbarsim::circuit
