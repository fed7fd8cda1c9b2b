#include "xbarsim/update.hpp"

#include <cmath>
#include <stdexcept>

#include "xbarsim/errors.hpp"

namespace xbarsim::update {

void UpdateSpec::validate() const {
  if (v < 0) throw std::invalid_argument("UpdateSpec: v must be >= 0");
  if (gamma < 0) throw std::invalid_argument("UpdateSpec: gamma must be >= 0");
  if (!(lr > 0)) throw std::invalid_argument("UpdateSpec: lr must be > 0");
}

Eigen::MatrixXd scale_gradient(const Eigen::MatrixXd& dW, const UpdateSpec& spec,
                               const circuit::CrossbarConfig& cfg) {
  if (!dW.allFinite())
    throw std::invalid_argument("scale_gradient: gradient must be finite");
  if (spec.layer_scale == 0.0)
    throw ConfigError("scale_gradient: layer_scale must be nonzero");
  const double factor = (cfg.g_max - cfg.g_min) / spec.layer_scale;
  return dW * factor;
}

double nonlinear_update(double g, double dg_ideal, const UpdateSpec& spec,
                        const circuit::CrossbarConfig& cfg) {
  if (g < cfg.g_min || g > cfg.g_max)
    throw std::invalid_argument("nonlinear_update: g outside device range");
  const double range = cfg.g_max - cfg.g_min;
  const double x = dg_ideal >= 0.0 ? (g - cfg.g_min) / range : (cfg.g_max - g) / range;
  return dg_ideal * std::exp(-spec.v * x);
}

double write_noise(double dg_ideal, const UpdateSpec& spec,
                   const circuit::CrossbarConfig& cfg, CounterRng& rng) {
  const double sigma =
      spec.gamma * std::sqrt((cfg.g_max - cfg.g_min) * std::abs(dg_ideal));
  if (sigma == 0.0) return 0.0;
  return sigma * rng.gaussian();
}

void apply_update(mapping::TiledLayerWeights& t, const Eigen::MatrixXd& dW,
                  const UpdateSpec& spec, std::uint64_t iteration) {
  spec.validate();
  if (dW.rows() != t.rows() || dW.cols() != t.cols())
    throw std::invalid_argument("apply_update: gradient shape does not match layer");

  const circuit::CrossbarConfig& cfg = t.tile_config();
  const double range = cfg.g_max - cfg.g_min;
  UpdateSpec eff = spec;
  if (eff.layer_scale == 0.0) eff.layer_scale = t.layer_scale();

  const Eigen::MatrixXd dg_ideal = scale_gradient(dW, eff, cfg);
  const int slices = t.num_slices();
  const bool linear = spec.v == 0.0;

  for (int s = 0; s < slices; ++s) {
    Eigen::MatrixXd& u = t.mutable_master_diff(s);
    for (int j = 0; j < t.cols(); ++j)
      for (int i = 0; i < t.rows(); ++i) {
        const double dg = dg_ideal(i, j);
        double du = dg;
        if (!linear && dg != 0.0) {
          // Device frame: the active polarity holds g_min + |u|; its ideal
          // change is -dg on the positive side and +dg on the negative side.
          const double ui = u(i, j);
          const bool pos_active = ui > 0.0 || (ui == 0.0 && dg < 0.0);
          const double dev_arg = pos_active ? -dg : dg;
          const double nl = nonlinear_update(cfg.g_min + std::abs(ui), dev_arg, eff, cfg);
          du = pos_active ? -nl : nl;
        }
        double noise = 0.0;
        if (spec.gamma != 0.0 && dg != 0.0) {
          const std::int64_t idx =
              static_cast<std::int64_t>(i) * t.cols() + j;
          CounterRng rng(eff.seed, iteration,
                         static_cast<std::uint64_t>(s),
                         static_cast<std::uint64_t>(idx));
          noise = write_noise(dg, eff, cfg, rng);
        }
        double nu = u(i, j) - eff.lr * (du + noise);
        if (nu > range) nu = range;
        if (nu < -range) nu = -range;
        u(i, j) = nu;
      }
  }
}

}  // namespace xbarsim::update
