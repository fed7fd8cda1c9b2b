#include "xbarsim/mapping.hpp"

#include <cmath>
#include <stdexcept>

#include "xbarsim/rng.hpp"

namespace xbarsim::mapping {

void MappingSpec::validate(const circuit::CrossbarConfig& cfg) const {
  if (weight_bits < 1 || weight_bits > 24)
    throw std::invalid_argument("MappingSpec: weight_bits must be in [1, 24]");
  if (device_bits < 1 || device_bits > weight_bits)
    throw std::invalid_argument("MappingSpec: device_bits must be in [1, weight_bits]");
  if (weight_bits % device_bits != 0)
    throw std::invalid_argument(
        "MappingSpec: weight_bits must be divisible by device_bits");
  if (tile_rows < 1 || tile_cols < 1)
    throw std::invalid_argument("MappingSpec: tile dims must be >= 1");
  if (tile_rows > cfg.rows || tile_cols > cfg.cols)
    throw std::invalid_argument("MappingSpec: tile dims exceed crossbar dims");
  if (variation_sigma < 0)
    throw std::invalid_argument("MappingSpec: variation_sigma must be >= 0");
}

namespace {

double variation_multiplier(std::uint64_t seed, int slice, Polarity p,
                            std::int64_t linear_index, double sigma) {
  CounterRng rng(seed, static_cast<std::uint64_t>(slice) * 2 +
                           (p == Polarity::neg ? 1 : 0),
                 static_cast<std::uint64_t>(linear_index));
  double m = 1.0 + sigma * rng.gaussian();
  return m > 1e-12 ? m : 1e-12;
}

}  // namespace

Eigen::MatrixXd TiledLayerWeights::master_polarity(int slice, Polarity p) const {
  const Eigen::MatrixXd& u = master_.at(static_cast<std::size_t>(slice));
  const double g_min = tile_cfg_.g_min;
  if (p == Polarity::pos)
    return (u.array().max(0.0) + g_min).matrix();
  return ((-u).array().max(0.0) + g_min).matrix();
}

Eigen::MatrixXd TiledLayerWeights::ideal_working(int slice, Polarity p) const {
  Eigen::MatrixXd g = master_polarity(slice, p);
  if (variation_sigma_ == 0.0) return g;
  const double g_max = tile_cfg_.g_max;
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const std::int64_t idx = static_cast<std::int64_t>(i) * padded_cols() + j;
      double m = variation_multiplier(variation_seed_, slice, p, idx, variation_sigma_);
      g(i, j) = std::min(g(i, j) * m, g_max);
    }
  return g;
}

circuit::ConductanceTile TiledLayerWeights::ideal_tile(int slice, Polarity p, int tr,
                                                       int tc) const {
  if (tr < 0 || tr >= grid_rows_ || tc < 0 || tc >= grid_cols_)
    throw std::invalid_argument("TiledLayerWeights: tile index out of range");
  Eigen::MatrixXd working = ideal_working(slice, p);
  Eigen::MatrixXd block = working.block(tr * spec_.tile_rows, tc * spec_.tile_cols,
                                        spec_.tile_rows, spec_.tile_cols);
  return circuit::ConductanceTile(tile_cfg_, std::move(block));
}

Eigen::MatrixXd TiledLayerWeights::implied_weights() const {
  const int slices = num_slices();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(padded_rows(), padded_cols());
  for (int s = slices - 1; s >= 0; --s)
    acc = acc * static_cast<double>(std::uint64_t{1} << spec_.device_bits) + master_[s];
  const double levels = static_cast<double>((std::uint64_t{1} << spec_.weight_bits) - 1);
  const double slice_levels =
      static_cast<double>((std::uint64_t{1} << spec_.device_bits) - 1);
  const double factor =
      (layer_scale_ / (tile_cfg_.g_max - tile_cfg_.g_min)) * (slice_levels / levels);
  return factor * acc.topLeftCorner(rows_, cols_);
}

TiledLayerWeights map_weights(const Eigen::MatrixXd& W, const MappingSpec& spec,
                              const circuit::CrossbarConfig& cfg) {
  cfg.validate();
  spec.validate(cfg);
  if (!W.allFinite())
    throw std::invalid_argument("map_weights: weights must be finite");
  if (W.rows() == 0 || W.cols() == 0)
    throw std::invalid_argument("map_weights: empty weight matrix");

  TiledLayerWeights t;
  t.spec_ = spec;
  t.tile_cfg_ = cfg;
  t.tile_cfg_.rows = spec.tile_rows;
  t.tile_cfg_.cols = spec.tile_cols;
  t.rows_ = static_cast<int>(W.rows());
  t.cols_ = static_cast<int>(W.cols());
  t.grid_rows_ = (t.rows_ + spec.tile_rows - 1) / spec.tile_rows;
  t.grid_cols_ = (t.cols_ + spec.tile_cols - 1) / spec.tile_cols;
  t.variation_sigma_ = spec.variation_sigma;
  t.variation_seed_ = spec.seed;

  double scale = spec.w_max > 0 ? spec.w_max : W.cwiseAbs().maxCoeff();
  if (scale == 0.0) scale = 1.0;  // all-zero layer still maps
  t.layer_scale_ = scale;

  const int slices = spec.num_slices();
  const std::uint64_t q_levels = (std::uint64_t{1} << spec.weight_bits) - 1;
  const std::uint64_t d_levels = (std::uint64_t{1} << spec.device_bits) - 1;
  t.level_step_ = (cfg.g_max - cfg.g_min) / static_cast<double>(d_levels);

  t.master_.assign(static_cast<std::size_t>(slices),
                   Eigen::MatrixXd::Zero(t.padded_rows(), t.padded_cols()));

  for (int i = 0; i < t.rows_; ++i)
    for (int j = 0; j < t.cols_; ++j) {
      const double w = W(i, j);
      const double mag = std::abs(w) / scale * static_cast<double>(q_levels);
      std::uint64_t q = static_cast<std::uint64_t>(std::llround(mag));
      if (q > q_levels) q = q_levels;
      const double sign = w < 0 ? -1.0 : 1.0;
      for (int s = 0; s < slices; ++s) {
        const std::uint64_t digit = (q >> (s * spec.device_bits)) & d_levels;
        if (digit != 0)
          t.master_[static_cast<std::size_t>(s)](i, j) =
              sign * (static_cast<double>(digit) * t.level_step_);
      }
    }
  return t;
}

TiledLayerWeights apply_variation(const TiledLayerWeights& t, double sigma,
                                  std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("apply_variation: sigma must be >= 0");
  TiledLayerWeights out = t;
  out.variation_sigma_ = sigma;
  out.variation_seed_ = seed;
  return out;
}

Eigen::VectorXd reconstruct_output(const std::vector<Eigen::VectorXd>& codes_pos,
                                   const std::vector<Eigen::VectorXd>& codes_neg,
                                   const MappingSpec& spec, double scale) {
  const std::size_t slices = static_cast<std::size_t>(spec.num_slices());
  if (codes_pos.size() != slices || codes_neg.size() != slices)
    throw std::invalid_argument("reconstruct_output: need codes for every slice");
  const Eigen::Index n = codes_pos.empty() ? 0 : codes_pos[0].size();
  for (std::size_t s = 0; s < slices; ++s)
    if (codes_pos[s].size() != n || codes_neg[s].size() != n)
      throw std::invalid_argument("reconstruct_output: inconsistent code lengths");

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  double w = 1.0;
  for (std::size_t s = 0; s < slices; ++s) {
    acc += w * (codes_pos[s] - codes_neg[s]);
    w *= static_cast<double>(std::uint64_t{1} << spec.device_bits);
  }
  return scale * acc;
}

}  // namespace xbarsim::mapping
