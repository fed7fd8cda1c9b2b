#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"

namespace xbarsim::mapping {

enum class Polarity { pos = 0, neg = 1 };

struct MappingSpec {
  int weight_bits = 8;   // precision of the weight magnitude
  int device_bits = 2;   // bits per synaptic device
  int tile_rows = 64;
  int tile_cols = 64;
  double variation_sigma = 0.0;  // relative std of multiplicative variation
  std::uint64_t seed = 0;
  double w_max = 0.0;  // <= 0: layer scale taken from max|W| at map time

  int num_slices() const { return weight_bits / device_bits; }
  void validate(const circuit::CrossbarConfig& cfg) const;
};

/// A layer's weight matrix mapped onto a grid of differential, bit-sliced
/// crossbar tiles.
///
/// The stored ideal state ("master") is kept per slice as a signed
/// differential conductance U in [-(g_max-g_min), +(g_max-g_min)]: the
/// positive-polarity device holds g_min + max(U, 0) and the negative one
/// g_min + max(-U, 0), so exactly one of the pair sits above g_min and a
/// zero weight parks both at g_min. The master is full precision, survives
/// conductance conversion unchanged, and is mutated only by the update
/// module between minibatches. Process variation is a deterministic
/// per-device multiplier derived from (seed, device index); it applies to
/// the working copies produced by ideal_working(), never to the master.
class TiledLayerWeights {
 public:
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int padded_rows() const { return grid_rows_ * spec_.tile_rows; }
  int padded_cols() const { return grid_cols_ * spec_.tile_cols; }
  int grid_rows() const { return grid_rows_; }
  int grid_cols() const { return grid_cols_; }
  int num_slices() const { return spec_.num_slices(); }
  double layer_scale() const { return layer_scale_; }
  const MappingSpec& spec() const { return spec_; }
  const circuit::CrossbarConfig& tile_config() const { return tile_cfg_; }

  double variation_sigma() const { return variation_sigma_; }
  std::uint64_t variation_seed() const { return variation_seed_; }

  const Eigen::MatrixXd& master_diff(int slice) const { return master_.at(slice); }
  Eigen::MatrixXd& mutable_master_diff(int slice) { return master_.at(slice); }

  /// Ideal per-polarity conductances derived from the master (padded dims).
  Eigen::MatrixXd master_polarity(int slice, Polarity p) const;

  /// Working ideal conductances: master polarity with process variation
  /// applied (identity when variation_sigma == 0).
  Eigen::MatrixXd ideal_working(int slice, Polarity p) const;

  /// One working tile as a ConductanceTile with tile-sized geometry.
  circuit::ConductanceTile ideal_tile(int slice, Polarity p, int tr, int tc) const;

  /// Signed weight values implied by the master state (logical dims).
  /// Inverts the mapping exactly for freshly mapped weights.
  Eigen::MatrixXd implied_weights() const;

  /// Conductance per digital level step, (g_max - g_min)/(2^device_bits - 1).
  double level_step() const { return level_step_; }

 private:
  friend TiledLayerWeights map_weights(const Eigen::MatrixXd&, const MappingSpec&,
                                       const circuit::CrossbarConfig&);
  friend TiledLayerWeights apply_variation(const TiledLayerWeights&, double,
                                           std::uint64_t);

  MappingSpec spec_;
  circuit::CrossbarConfig tile_cfg_;  // tile-sized geometry (parasitics from base)
  int rows_ = 0, cols_ = 0;
  int grid_rows_ = 0, grid_cols_ = 0;
  double layer_scale_ = 1.0;
  double level_step_ = 0.0;
  double variation_sigma_ = 0.0;
  std::uint64_t variation_seed_ = 0;
  std::vector<Eigen::MatrixXd> master_;  // per slice, padded dims, signed
};

/// Quantize W to signed fixed point (weight_bits magnitude plus sign via the
/// differential pair), split the magnitude into weight_bits/device_bits
/// slices, map slice levels onto [g_min, g_max], and partition into
/// ceil(rows/tile_rows) x ceil(cols/tile_cols) tiles with g_min padding.
TiledLayerWeights map_weights(const Eigen::MatrixXd& W, const MappingSpec& spec,
                              const circuit::CrossbarConfig& cfg);

/// Returns a copy of t whose working conductances carry multiplicative
/// Gaussian variation Normal(1, sigma), clamped to (0, g_max], derived
/// deterministically from seed. The master is untouched.
TiledLayerWeights apply_variation(const TiledLayerWeights& t, double sigma,
                                  std::uint64_t seed);

/// Digital recombination of per-slice, per-polarity column codes:
/// scale * sum_s 2^(s*device_bits) * (pos[s] - neg[s]).
Eigen::VectorXd reconstruct_output(const std::vector<Eigen::VectorXd>& codes_pos,
                                   const std::vector<Eigen::VectorXd>& codes_neg,
                                   const MappingSpec& spec, double scale);

}  // namespace xbarsim::mapping
