#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "xbarsim/converters.hpp"
#include "xbarsim/crossbar.hpp"
#include "xbarsim/distortion.hpp"
#include "xbarsim/engine.hpp"
#include "xbarsim/mapping.hpp"
#include "xbarsim/tensor.hpp"
#include "xbarsim/update.hpp"

namespace xbarsim::nn {

struct CrossbarLayerOptions {
  mapping::MappingSpec map;
  circuit::CrossbarConfig crossbar;
  converters::DacSpec dac;
  converters::AdcSpec adc;
  update::UpdateSpec update;
  EngineKind engine = EngineKind::fcm;
  EngineKind interp_base = EngineKind::fcm;  // engine run at interp refreshes
  int interp_interval = 10;                  // L
  double fcm_tol = 1e-6;
  int fcm_max_iter = 1000;
  int act_bits = 8;
  double act_full_scale = 1.0;
  int error_bits = 8;
  int adc_cal_batches = 20;  // training batches of pass-through stat collection
  int threads = 1;

  void validate() const;
};

/// Shared three-stage VMM engine: DAC bit-streaming, per-tile multiply with
/// the selected engine's non-ideal conductances, per-column ADC, digital
/// shift-add, differential subtraction and tile stitching. Owns the mapped
/// weight state and its update plumbing. Used by both the dense and the
/// im2col-lowered convolution layers.
///
/// When the layer is fully ideal (ideal engine, no variation, linear DAC,
/// pass-through ADC) the pipeline reduces algebraically to a fixed-point
/// matmul with the implied weights; that reduction is evaluated directly so
/// the ideal configuration reproduces the digital reference bit for bit.
class CrossbarCore {
 public:
  CrossbarCore(const Eigen::MatrixXd& W0, const CrossbarLayerOptions& opt);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training);
  /// dx from the transposed non-ideal pipeline; dW = x^T dy / grad_divisor
  /// stashed for apply_updates. Requires a cached forward.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, double grad_divisor);
  void apply_updates(std::uint64_t iteration);

  int in_features() const { return weights_.rows(); }
  int out_features() const { return weights_.cols(); }
  const mapping::TiledLayerWeights& weights() const { return weights_; }
  const Eigen::MatrixXd& gradient() const { return dW_; }

  long refresh_count() const { return refreshes_; }
  double conversion_seconds() const { return conversion_seconds_; }
  double weight_abs_max_seen() const { return wmax_seen_; }
  double grad_abs_max_seen() const { return dwmax_seen_; }
  double forward_adc_full_scale() const { return adc_fwd_.i_fs; }

  /// Non-ideal conductances of one tile as currently used by the pipeline.
  const Eigen::MatrixXd& nonideal(int slice, mapping::Polarity p, int tile) const;

 private:
  bool fully_ideal() const;
  void regenerate();
  void maybe_freeze_adc();
  Eigen::MatrixXd convert_tile(const circuit::ConductanceTile& tile, int slice,
                               int pol, int tile_index);
  Eigen::MatrixXd sense(const Eigen::MatrixXd& currents,
                        const converters::AdcSpec& spec,
                        converters::AdcCalibrator& cal, bool observe);

  CrossbarLayerOptions opt_;
  mapping::TiledLayerWeights weights_;
  Eigen::MatrixXd wimp_;  // implied weights (ideal fast path)

  // [slice][pol][tile] with tile = tr * grid_cols + tc.
  std::vector<std::vector<std::vector<Eigen::MatrixXd>>> nonideal_;
  std::vector<std::vector<std::vector<circuit::DistortionCache>>> caches_;

  converters::AdcSpec adc_fwd_;
  converters::AdcSpec adc_bwd_;
  converters::AdcCalibrator cal_fwd_;
  converters::AdcCalibrator cal_bwd_;
  bool adc_auto_ = false;
  bool adc_frozen_ = false;
  long training_batches_ = 0;

  std::vector<double> dac_lut_;  // digit -> volts

  Eigen::MatrixXd x_values_;  // cached quantized input values (batch x in)
  bool have_forward_ = false;
  Eigen::MatrixXd dW_;
  bool have_grad_ = false;

  std::uint64_t update_count_ = 0;
  long refreshes_ = 0;
  double conversion_seconds_ = 0.0;
  double wmax_seen_ = 0.0;
  double dwmax_seen_ = 0.0;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void apply_updates(std::uint64_t /*iteration*/) {}
  virtual CrossbarCore* core() { return nullptr; }
  virtual std::string name() const = 0;
};

class CrossbarLinear : public Layer {
 public:
  CrossbarLinear(const Eigen::MatrixXd& W0, const CrossbarLayerOptions& opt);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void apply_updates(std::uint64_t iteration) override;
  CrossbarCore* core() override { return &core_; }
  std::string name() const override { return "linear"; }

 private:
  CrossbarCore core_;
};

class CrossbarConv2d : public Layer {
 public:
  /// W0 is (in_c * kernel * kernel) x out_c.
  CrossbarConv2d(const Eigen::MatrixXd& W0, int in_c, int out_c, int kernel,
                 int stride, int padding, const CrossbarLayerOptions& opt);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void apply_updates(std::uint64_t iteration) override;
  CrossbarCore* core() override { return &core_; }
  std::string name() const override { return "conv2d"; }

 private:
  CrossbarCore core_;
  int in_c_, out_c_, kernel_, stride_, padding_;
  int in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
  Eigen::Index batch_ = 0;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::string name() const override { return "relu"; }

 private:
  Eigen::MatrixXd mask_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int kernel, int stride);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::string name() const override { return "maxpool2d"; }

 private:
  int kernel_, stride_;
  std::vector<int> arg_;  // winning flat input index per pooled output
  std::vector<int> in_dims_;
  Eigen::Index batch_ = 0;
};

class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::string name() const override { return "flatten"; }

 private:
  std::vector<int> in_dims_;
};

/// Minimal batch normalization over features, computed digitally at full
/// precision; gamma/beta trained with plain SGD.
class BatchNorm1d : public Layer {
 public:
  BatchNorm1d(int features, double lr, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  void apply_updates(std::uint64_t iteration) override;
  std::string name() const override { return "batchnorm1d"; }

 private:
  double lr_, momentum_, eps_;
  Eigen::VectorXd gamma_, beta_, running_mean_, running_var_;
  Eigen::VectorXd dgamma_, dbeta_, batch_mean_, batch_invstd_;
  Eigen::MatrixXd xhat_;
};

}  // namespace xbarsim::nn
