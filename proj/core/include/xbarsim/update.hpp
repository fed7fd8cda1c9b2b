#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "xbarsim/crossbar.hpp"
#include "xbarsim/mapping.hpp"
#include "xbarsim/rng.hpp"

namespace xbarsim::update {

struct UpdateSpec {
  double v = 0.0;       // update non-linearity factor
  double gamma = 0.0;   // write noise factor
  double lr = 0.01;
  std::uint64_t seed = 0;
  // Gradient -> conductance scale in weight units (the Wmax statistic).
  // apply_update substitutes the layer's mapping scale when this is 0.
  double layer_scale = 0.0;

  void validate() const;
};

/// ΔG_ideal = dW * (g_max - g_min) / layer_scale, elementwise.
Eigen::MatrixXd scale_gradient(const Eigen::MatrixXd& dW, const UpdateSpec& spec,
                               const circuit::CrossbarConfig& cfg);

/// State-dependent attenuation of an intended device conductance change
/// dg_ideal (device frame: positive = potentiation). The change shrinks
/// exponentially with the distance already covered toward the approaching
/// rail:
///   dg_ideal >= 0:  dg_ideal * exp(-v * (g - g_min)/(g_max - g_min))
///   dg_ideal <  0:  dg_ideal * exp(-v * (g_max - g)/(g_max - g_min))
/// v = 0 is the linear device; the sign of dg_ideal is never flipped.
double nonlinear_update(double g, double dg_ideal, const UpdateSpec& spec,
                        const circuit::CrossbarConfig& cfg);

/// One stochastic write-noise draw: Normal(0, gamma * sqrt((g_max-g_min)*|dg_ideal|)).
/// Returns exactly 0 when the deviation is 0 (gamma == 0 or dg_ideal == 0).
double write_noise(double dg_ideal, const UpdateSpec& spec,
                   const circuit::CrossbarConfig& cfg, CounterRng& rng);

/// Applies one minibatch update to the stored ideal conductance state:
/// per device, g <- clamp(g - lr * (nonlinear_update + write_noise),
/// g_min, g_max), routed to the polarity currently encoding each weight and
/// switching polarity when the magnitude crosses zero. Noise draws are keyed
/// by (seed, iteration, slice, device index), so the result is independent
/// of evaluation order. The caller regenerates non-ideal working
/// conductances afterwards.
void apply_update(mapping::TiledLayerWeights& t, const Eigen::MatrixXd& dW,
                  const UpdateSpec& spec, std::uint64_t iteration);

}  // namespace xbarsim::update
