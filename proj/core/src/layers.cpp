#include "xbarsim/layers.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "xbarsim/aam.hpp"
#include "xbarsim/errors.hpp"
#include "xbarsim/fcm.hpp"
#include "xbarsim/nodal.hpp"
#include "parallel.hpp"

namespace xbarsim::nn {

using mapping::Polarity;

void CrossbarLayerOptions::validate() const {
  crossbar.validate();
  map.validate(crossbar);
  dac.validate();
  adc.validate();
  update.validate();
  if (dac.bits != dac.stream_bits)
    throw ConfigError("dac.bits (" + std::to_string(dac.bits) +
                      ") must equal dac.stream_bits (" +
                      std::to_string(dac.stream_bits) +
                      "): the streamed slice is the physical converter");
  if (act_bits < 1 || act_bits > 24)
    throw ConfigError("act_bits must be in [1, 24]");
  if (error_bits < 1 || error_bits > 24)
    throw ConfigError("error_bits must be in [1, 24]");
  if (act_bits % dac.stream_bits != 0)
    throw ConfigError("activation_bits (" + std::to_string(act_bits) +
                      ") must be divisible by dac.stream_bits (" +
                      std::to_string(dac.stream_bits) + ")");
  if (error_bits % dac.stream_bits != 0)
    throw ConfigError("error_bits (" + std::to_string(error_bits) +
                      ") must be divisible by dac.stream_bits (" +
                      std::to_string(dac.stream_bits) + ")");
  if (!(act_full_scale > 0)) throw ConfigError("act_full_scale must be > 0");
  if (interp_interval < 1) throw ConfigError("interp_interval must be >= 1");
  if (engine == EngineKind::interp_fcm && interp_base != EngineKind::fcm &&
      interp_base != EngineKind::aam)
    throw ConfigError("interp_base must be fcm or aam");
  if (adc_cal_batches < 1) throw ConfigError("adc_cal_batches must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

// Digit planes of unsigned codes, LSB-first base-2^stream_bits.
Eigen::MatrixXi digit_plane(const Eigen::MatrixXi& codes, int k, int stream_bits) {
  const int shift = k * stream_bits;
  const int mask = (1 << stream_bits) - 1;
  return codes.unaryExpr([shift, mask](int c) { return (c >> shift) & mask; });
}

Eigen::MatrixXd lut_volts(const Eigen::MatrixXi& digits, const std::vector<double>& lut) {
  Eigen::MatrixXd v(digits.rows(), digits.cols());
  for (Eigen::Index j = 0; j < digits.cols(); ++j)
    for (Eigen::Index i = 0; i < digits.rows(); ++i)
      v(i, j) = lut[static_cast<std::size_t>(digits(i, j))];
  return v;
}

}  // namespace

CrossbarCore::CrossbarCore(const Eigen::MatrixXd& W0, const CrossbarLayerOptions& opt)
    : opt_(opt), weights_(mapping::map_weights(W0, opt.map, opt.crossbar)) {
  opt_.validate();

  adc_fwd_ = opt_.adc;
  adc_bwd_ = opt_.adc;
  adc_auto_ = opt_.adc.bits > 0 && !(opt_.adc.i_fs > 0) && opt_.adc.transfer.empty();

  const int digits = 1 << opt_.dac.bits;
  dac_lut_.resize(static_cast<std::size_t>(digits));
  for (int d = 0; d < digits; ++d)
    dac_lut_[static_cast<std::size_t>(d)] =
        converters::dac_encode(static_cast<std::uint64_t>(d), opt_.dac);

  regenerate();
}

bool CrossbarCore::fully_ideal() const {
  return opt_.engine == EngineKind::ideal && weights_.variation_sigma() == 0.0 &&
         opt_.dac.ideal_linear() && opt_.adc.bits == 0;
}

Eigen::MatrixXd CrossbarCore::convert_tile(const circuit::ConductanceTile& tile,
                                           int slice, int pol, int tile_index) {
  const auto& cfg = tile.config;
  circuit::FcmOptions fcm_opt;
  fcm_opt.tol = opt_.fcm_tol;
  fcm_opt.max_iter = opt_.fcm_max_iter;

  switch (opt_.engine) {
    case EngineKind::ideal:
      return tile.g;
    case EngineKind::fcm:
      return circuit::fcm_convert(tile, fcm_opt).g;
    case EngineKind::aam:
      return circuit::aam_convert(tile).g;
    case EngineKind::oracle: {
      if (cfg.r_row == 0.0 && cfg.r_col == 0.0 && cfg.r_source == 0.0 &&
          cfg.r_sense == 0.0)
        return tile.g;
      auto sol = circuit::solve_nodal_oracle(
          tile, Eigen::VectorXd::Constant(cfg.rows, cfg.v_fs));
      Eigen::MatrixXd g(cfg.rows, cfg.cols);
      for (int j = 0; j < cfg.cols; ++j)
        for (int i = 0; i < cfg.rows; ++i) {
          double eff = tile.g(i, j) * (sol.v_top(i, j) - sol.v_bot(i, j)) / cfg.v_fs;
          g(i, j) = std::min(std::max(eff, 0.0), tile.g(i, j));
        }
      return g;
    }
    case EngineKind::interp_fcm: {
      auto& cache = caches_[static_cast<std::size_t>(slice)][static_cast<std::size_t>(
          pol)][static_cast<std::size_t>(tile_index)];
      if (update_count_ % static_cast<std::uint64_t>(opt_.interp_interval) == 0)
        circuit::refresh_distortion(cache, tile, opt_.interp_base, fcm_opt);
      return circuit::apply_distortion(cache, tile).g;
    }
  }
  throw std::logic_error("unreachable engine kind");
}

void CrossbarCore::regenerate() {
  const auto t0 = std::chrono::steady_clock::now();
  if (opt_.engine == EngineKind::ideal) {
    wimp_ = weights_.implied_weights();
    if (!opt_.dac.ideal_linear() || opt_.adc.bits != 0 ||
        weights_.variation_sigma() != 0.0) {
      // Streamed pipeline still needs per-tile conductances.
    } else {
      conversion_seconds_ +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return;
    }
  }

  const int slices = weights_.num_slices();
  const int tiles = weights_.grid_rows() * weights_.grid_cols();
  const bool interp = opt_.engine == EngineKind::interp_fcm;
  const bool refresh_now =
      !interp || update_count_ % static_cast<std::uint64_t>(opt_.interp_interval) == 0;

  if (nonideal_.empty()) {
    nonideal_.assign(static_cast<std::size_t>(slices),
                     std::vector<std::vector<Eigen::MatrixXd>>(
                         2, std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(tiles))));
    if (interp)
      caches_.assign(static_cast<std::size_t>(slices),
                     std::vector<std::vector<circuit::DistortionCache>>(
                         2, std::vector<circuit::DistortionCache>(
                                static_cast<std::size_t>(tiles))));
    if (interp)
      for (auto& per_slice : caches_)
        for (auto& per_pol : per_slice)
          for (auto& cache : per_pol) cache.refresh_interval = opt_.interp_interval;
  }

  const int jobs = slices * 2 * tiles;
  detail::parallel_for(jobs, opt_.threads, [&](int job) {
    const int s = job / (2 * tiles);
    const int p = (job / tiles) % 2;
    const int t = job % tiles;
    const int tr = t / weights_.grid_cols();
    const int tc = t % weights_.grid_cols();
    auto tile = weights_.ideal_tile(s, p == 0 ? Polarity::pos : Polarity::neg, tr, tc);
    nonideal_[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)]
             [static_cast<std::size_t>(t)] = convert_tile(tile, s, p, t);
  });

  if (refresh_now && opt_.engine != EngineKind::ideal) ++refreshes_;
  conversion_seconds_ +=
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const Eigen::MatrixXd& CrossbarCore::nonideal(int slice, Polarity p, int tile) const {
  if (nonideal_.empty())
    throw StateError("CrossbarCore: no non-ideal state for the ideal fast path");
  return nonideal_.at(static_cast<std::size_t>(slice))
      .at(p == Polarity::pos ? 0 : 1)
      .at(static_cast<std::size_t>(tile));
}

void CrossbarCore::maybe_freeze_adc() {
  if (!adc_auto_ || adc_frozen_) return;
  if (training_batches_ < opt_.adc_cal_batches) return;
  if (cal_fwd_.sample_count() > 0)
    adc_fwd_.i_fs = cal_fwd_.calibrate(adc_fwd_.clip_percentile);
  if (cal_bwd_.sample_count() > 0)
    adc_bwd_.i_fs = cal_bwd_.calibrate(adc_bwd_.clip_percentile);
  adc_frozen_ = true;
}

Eigen::MatrixXd CrossbarCore::sense(const Eigen::MatrixXd& currents,
                                    const converters::AdcSpec& spec,
                                    converters::AdcCalibrator& cal, bool observe) {
  if (spec.bits == 0) return currents;
  const bool calibrating = adc_auto_ && !adc_frozen_;
  if (calibrating) {
    if (observe)
      for (Eigen::Index j = 0; j < currents.cols(); ++j)
        for (Eigen::Index i = 0; i < currents.rows(); ++i) cal.observe(currents(i, j));
    return currents;  // pass-through until the full scale is frozen
  }
  return currents.unaryExpr([&spec](double i) {
    return static_cast<double>(converters::adc_quantize(i, spec));
  });
}

Eigen::MatrixXd CrossbarCore::forward(const Eigen::MatrixXd& x, bool training) {
  if (x.cols() != weights_.rows())
    throw std::invalid_argument("CrossbarCore::forward: feature count mismatch");
  maybe_freeze_adc();

  const Eigen::Index batch = x.rows();
  Eigen::MatrixXi codes = quantize_unsigned_codes(x, opt_.act_bits, opt_.act_full_scale);
  x_values_ = codes_to_values(codes, opt_.act_bits, opt_.act_full_scale);
  have_forward_ = true;
  if (training) ++training_batches_;

  if (fully_ideal()) return x_values_ * wimp_;

  const int in = weights_.rows();
  const int out = weights_.cols();
  const int tile_rows = weights_.spec().tile_rows;
  const int tile_cols = weights_.spec().tile_cols;
  const int slices = weights_.num_slices();
  const int sb = opt_.dac.stream_bits;
  const int n_streams = opt_.act_bits / sb;

  Eigen::MatrixXi codes_pad = Eigen::MatrixXi::Zero(batch, weights_.padded_rows());
  codes_pad.leftCols(in) = codes;

  std::vector<Eigen::MatrixXd> volts(static_cast<std::size_t>(n_streams));
  for (int k = 0; k < n_streams; ++k)
    volts[static_cast<std::size_t>(k)] = lut_volts(digit_plane(codes_pad, k, sb), dac_lut_);

  const double slice_base = std::pow(2.0, weights_.spec().device_bits);
  const double stream_base = std::pow(2.0, sb);

  Eigen::MatrixXd out_pad = Eigen::MatrixXd::Zero(batch, weights_.padded_cols());
  for (int tc = 0; tc < weights_.grid_cols(); ++tc)
    for (int tr = 0; tr < weights_.grid_rows(); ++tr) {
      const int t = tr * weights_.grid_cols() + tc;
      Eigen::MatrixXd tile_out = Eigen::MatrixXd::Zero(batch, tile_cols);
      for (int s = 0; s < slices; ++s) {
        const double sw = std::pow(slice_base, s);
        for (int p = 0; p < 2; ++p) {
          const Eigen::MatrixXd& G =
              nonideal_[static_cast<std::size_t>(s)][static_cast<std::size_t>(p)]
                       [static_cast<std::size_t>(t)];
          Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(batch, tile_cols);
          double wk = 1.0;
          for (int k = 0; k < n_streams; ++k) {
            Eigen::MatrixXd currents =
                volts[static_cast<std::size_t>(k)].middleCols(tr * tile_rows, tile_rows) *
                G;
            acc.noalias() += wk * sense(currents, adc_fwd_, cal_fwd_, training);
            wk *= stream_base;
          }
          tile_out += (p == 0 ? sw : -sw) * acc;
        }
      }
      out_pad.middleCols(tc * tile_cols, tile_cols) += tile_out;
    }

  const double vu = opt_.dac.v_fs / (std::pow(2.0, opt_.dac.bits) - 1.0);
  const double sx = opt_.act_full_scale / (std::pow(2.0, opt_.act_bits) - 1.0);
  const double levels = std::pow(2.0, weights_.spec().weight_bits) - 1.0;
  const double slice_levels = std::pow(2.0, weights_.spec().device_bits) - 1.0;
  const double F = (weights_.layer_scale() /
                    (opt_.crossbar.g_max - opt_.crossbar.g_min)) *
                   (slice_levels / levels);
  double k_out = sx * F / vu;
  if (adc_fwd_.bits > 0 && (adc_frozen_ || !adc_auto_) && adc_fwd_.transfer.empty())
    k_out *= adc_fwd_.i_fs / (std::pow(2.0, adc_fwd_.bits) - 1.0);

  return out_pad.leftCols(out) * k_out;
}

Eigen::MatrixXd CrossbarCore::backward(const Eigen::MatrixXd& dy, double grad_divisor) {
  if (!have_forward_)
    throw StateError("CrossbarCore::backward: no cached forward activations");
  if (dy.cols() != weights_.cols() || dy.rows() != x_values_.rows())
    throw std::invalid_argument("CrossbarCore::backward: gradient shape mismatch");
  maybe_freeze_adc();

  const Eigen::Index batch = dy.rows();
  const int in = weights_.rows();
  const int out = weights_.cols();
  const int eb = opt_.error_bits;

  const double se = dy.cwiseAbs().maxCoeff();
  SignedCodes sc = quantize_signed_codes(dy, eb, se);
  const double step_e = se > 0 ? se / (std::pow(2.0, eb) - 1.0) : 0.0;
  Eigen::MatrixXd dy_q =
      sc.sign.cast<double>().cwiseProduct(sc.magnitude.cast<double>()) * step_e;

  dW_ = x_values_.transpose() * dy_q / grad_divisor;
  have_grad_ = true;

  if (fully_ideal()) return dy_q * wimp_.transpose();
  if (!(se > 0)) return Eigen::MatrixXd::Zero(batch, in);

  const int tile_rows = weights_.spec().tile_rows;
  const int tile_cols = weights_.spec().tile_cols;
  const int slices = weights_.num_slices();
  const int sb = opt_.dac.stream_bits;
  const int n_streams = eb / sb;

  Eigen::MatrixXi plus = Eigen::MatrixXi::Zero(batch, weights_.padded_cols());
  Eigen::MatrixXi minus = Eigen::MatrixXi::Zero(batch, weights_.padded_cols());
  for (Eigen::Index j = 0; j < out; ++j)
    for (Eigen::Index i = 0; i < batch; ++i) {
      if (sc.sign(i, j) > 0)
        plus(i, j) = sc.magnitude(i, j);
      else if (sc.sign(i, j) < 0)
        minus(i, j) = sc.magnitude(i, j);
    }

  std::vector<Eigen::MatrixXd> vp(static_cast<std::size_t>(n_streams));
  std::vector<Eigen::MatrixXd> vm(static_cast<std::size_t>(n_streams));
  for (int k = 0; k < n_streams; ++k) {
    vp[static_cast<std::size_t>(k)] = lut_volts(digit_plane(plus, k, sb), dac_lut_);
    vm[static_cast<std::size_t>(k)] = lut_volts(digit_plane(minus, k, sb), dac_lut_);
  }

  const double slice_base = std::pow(2.0, weights_.spec().device_bits);
  const double stream_base = std::pow(2.0, sb);

  // Signed inputs drive the transposed arrays in two phases (positive and
  // negative error groups); each phase readout of each polarity array is a
  // separate ADC conversion, recombined digitally.
  Eigen::MatrixXd dx_pad = Eigen::MatrixXd::Zero(batch, weights_.padded_rows());
  for (int tr = 0; tr < weights_.grid_rows(); ++tr)
    for (int tc = 0; tc < weights_.grid_cols(); ++tc) {
      const int t = tr * weights_.grid_cols() + tc;
      Eigen::MatrixXd tile_dx = Eigen::MatrixXd::Zero(batch, tile_rows);
      for (int s = 0; s < slices; ++s) {
        const double sw = std::pow(slice_base, s);
        const Eigen::MatrixXd& gp = nonideal_[static_cast<std::size_t>(s)][0]
                                             [static_cast<std::size_t>(t)];
        const Eigen::MatrixXd& gn = nonideal_[static_cast<std::size_t>(s)][1]
                                             [static_cast<std::size_t>(t)];
        Eigen::MatrixXd acc_pos = Eigen::MatrixXd::Zero(batch, tile_rows);
        Eigen::MatrixXd acc_neg = Eigen::MatrixXd::Zero(batch, tile_rows);
        double wk = 1.0;
        for (int k = 0; k < n_streams; ++k) {
          auto vpb = vp[static_cast<std::size_t>(k)].middleCols(tc * tile_cols, tile_cols);
          auto vmb = vm[static_cast<std::size_t>(k)].middleCols(tc * tile_cols, tile_cols);
          acc_pos.noalias() +=
              wk * (sense(vpb * gp.transpose(), adc_bwd_, cal_bwd_, true) +
                    sense(vmb * gn.transpose(), adc_bwd_, cal_bwd_, true));
          acc_neg.noalias() +=
              wk * (sense(vpb * gn.transpose(), adc_bwd_, cal_bwd_, true) +
                    sense(vmb * gp.transpose(), adc_bwd_, cal_bwd_, true));
          wk *= stream_base;
        }
        tile_dx += sw * (acc_pos - acc_neg);
      }
      dx_pad.middleCols(tr * tile_rows, tile_rows) += tile_dx;
    }

  const double vu = opt_.dac.v_fs / (std::pow(2.0, opt_.dac.bits) - 1.0);
  const double levels = std::pow(2.0, weights_.spec().weight_bits) - 1.0;
  const double slice_levels = std::pow(2.0, weights_.spec().device_bits) - 1.0;
  const double F = (weights_.layer_scale() /
                    (opt_.crossbar.g_max - opt_.crossbar.g_min)) *
                   (slice_levels / levels);
  double k_out = step_e * F / vu;
  if (adc_bwd_.bits > 0 && (adc_frozen_ || !adc_auto_) && adc_bwd_.transfer.empty())
    k_out *= adc_bwd_.i_fs / (std::pow(2.0, adc_bwd_.bits) - 1.0);

  return dx_pad.leftCols(in) * k_out;
}

void CrossbarCore::apply_updates(std::uint64_t iteration) {
  if (!have_grad_) return;  // e.g. the minibatch was skipped on divergence
  dwmax_seen_ = std::max(dwmax_seen_, dW_.cwiseAbs().maxCoeff());
  update::apply_update(weights_, dW_, opt_.update, iteration);
  wmax_seen_ = std::max(wmax_seen_, weights_.implied_weights().cwiseAbs().maxCoeff());
  ++update_count_;
  regenerate();
  have_grad_ = false;
  have_forward_ = false;
}

CrossbarLinear::CrossbarLinear(const Eigen::MatrixXd& W0,
                               const CrossbarLayerOptions& opt)
    : core_(W0, opt) {}

Tensor CrossbarLinear::forward(const Tensor& x, bool training) {
  Tensor y;
  y.values = core_.forward(x.values, training);
  y.dims = {core_.out_features()};
  return y;
}

Tensor CrossbarLinear::backward(const Tensor& dy) {
  Tensor dx;
  dx.values = core_.backward(dy.values, 1.0);
  dx.dims = {core_.in_features()};
  return dx;
}

void CrossbarLinear::apply_updates(std::uint64_t iteration) {
  core_.apply_updates(iteration);
}

CrossbarConv2d::CrossbarConv2d(const Eigen::MatrixXd& W0, int in_c, int out_c,
                               int kernel, int stride, int padding,
                               const CrossbarLayerOptions& opt)
    : core_(W0, opt),
      in_c_(in_c),
      out_c_(out_c),
      kernel_(kernel),
      stride_(stride),
      padding_(padding) {
  if (W0.rows() != static_cast<Eigen::Index>(in_c) * kernel * kernel ||
      W0.cols() != out_c)
    throw std::invalid_argument("CrossbarConv2d: kernel matrix must be (in_c*k*k) x out_c");
  if (stride < 1 || kernel < 1 || padding < 0)
    throw std::invalid_argument("CrossbarConv2d: bad geometry");
}

Tensor CrossbarConv2d::forward(const Tensor& x, bool training) {
  if (x.dims.size() != 3 || x.dims[0] != in_c_)
    throw std::invalid_argument("CrossbarConv2d: expected (c, h, w) input");
  in_h_ = x.dims[1];
  in_w_ = x.dims[2];
  out_h_ = (in_h_ + 2 * padding_ - kernel_) / stride_ + 1;
  out_w_ = (in_w_ + 2 * padding_ - kernel_) / stride_ + 1;
  if (out_h_ < 1 || out_w_ < 1)
    throw std::invalid_argument("CrossbarConv2d: kernel does not fit the input");
  batch_ = x.batch();

  // im2col: one row per output position per sample.
  const Eigen::Index rows = batch_ * out_h_ * out_w_;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(rows, in_c_ * kernel_ * kernel_);
  for (Eigen::Index b = 0; b < batch_; ++b)
    for (int oy = 0; oy < out_h_; ++oy)
      for (int ox = 0; ox < out_w_; ++ox) {
        const Eigen::Index r = (b * out_h_ + oy) * out_w_ + ox;
        for (int c = 0; c < in_c_; ++c)
          for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
              const int iy = oy * stride_ + ky - padding_;
              const int ix = ox * stride_ + kx - padding_;
              if (iy < 0 || iy >= in_h_ || ix < 0 || ix >= in_w_) continue;
              patches(r, (c * kernel_ + ky) * kernel_ + kx) =
                  x.values(b, (c * in_h_ + iy) * in_w_ + ix);
            }
      }

  Eigen::MatrixXd flat = core_.forward(patches, training);  // rows x out_c

  Tensor y;
  y.dims = {out_c_, out_h_, out_w_};
  y.values.resize(batch_, static_cast<Eigen::Index>(out_c_) * out_h_ * out_w_);
  for (Eigen::Index b = 0; b < batch_; ++b)
    for (int oc = 0; oc < out_c_; ++oc)
      for (int oy = 0; oy < out_h_; ++oy)
        for (int ox = 0; ox < out_w_; ++ox)
          y.values(b, (oc * out_h_ + oy) * out_w_ + ox) =
              flat((b * out_h_ + oy) * out_w_ + ox, oc);
  return y;
}

Tensor CrossbarConv2d::backward(const Tensor& dy) {
  const Eigen::Index rows = batch_ * out_h_ * out_w_;
  Eigen::MatrixXd flat(rows, out_c_);
  for (Eigen::Index b = 0; b < batch_; ++b)
    for (int oc = 0; oc < out_c_; ++oc)
      for (int oy = 0; oy < out_h_; ++oy)
        for (int ox = 0; ox < out_w_; ++ox)
          flat((b * out_h_ + oy) * out_w_ + ox, oc) =
              dy.values(b, (oc * out_h_ + oy) * out_w_ + ox);

  Eigen::MatrixXd dpatches = core_.backward(flat, 1.0);

  Tensor dx;
  dx.dims = {in_c_, in_h_, in_w_};
  dx.values = Eigen::MatrixXd::Zero(batch_, static_cast<Eigen::Index>(in_c_) * in_h_ * in_w_);
  for (Eigen::Index b = 0; b < batch_; ++b)
    for (int oy = 0; oy < out_h_; ++oy)
      for (int ox = 0; ox < out_w_; ++ox) {
        const Eigen::Index r = (b * out_h_ + oy) * out_w_ + ox;
        for (int c = 0; c < in_c_; ++c)
          for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
              const int iy = oy * stride_ + ky - padding_;
              const int ix = ox * stride_ + kx - padding_;
              if (iy < 0 || iy >= in_h_ || ix < 0 || ix >= in_w_) continue;
              dx.values(b, (c * in_h_ + iy) * in_w_ + ix) +=
                  dpatches(r, (c * kernel_ + ky) * kernel_ + kx);
            }
      }
  return dx;
}

void CrossbarConv2d::apply_updates(std::uint64_t iteration) {
  core_.apply_updates(iteration);
}

Tensor ReLU::forward(const Tensor& x, bool) {
  mask_ = (x.values.array() > 0.0).cast<double>().matrix();
  Tensor y = x;
  y.values = x.values.cwiseProduct(mask_);
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  dx.values = dy.values.cwiseProduct(mask_);
  return dx;
}

MaxPool2d::MaxPool2d(int kernel, int stride) : kernel_(kernel), stride_(stride) {
  if (kernel < 1 || stride < 1)
    throw std::invalid_argument("MaxPool2d: bad kernel/stride");
}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
  if (x.dims.size() != 3) throw std::invalid_argument("MaxPool2d: expected (c, h, w)");
  const int c = x.dims[0], h = x.dims[1], w = x.dims[2];
  const int oh = (h - kernel_) / stride_ + 1;
  const int ow = (w - kernel_) / stride_ + 1;
  batch_ = x.batch();
  in_dims_ = x.dims;

  Tensor y;
  y.dims = {c, oh, ow};
  y.values.resize(batch_, static_cast<Eigen::Index>(c) * oh * ow);
  arg_.assign(static_cast<std::size_t>(batch_ * c * oh * ow), 0);
  for (Eigen::Index b = 0; b < batch_; ++b)
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          int best_idx = 0;
          for (int ky = 0; ky < kernel_; ++ky)
            for (int kx = 0; kx < kernel_; ++kx) {
              const int iy = oy * stride_ + ky;
              const int ix = ox * stride_ + kx;
              const int idx = (ch * h + iy) * w + ix;
              const double v = x.values(b, idx);
              if (v > best) {
                best = v;
                best_idx = idx;
              }
            }
          const Eigen::Index o = (static_cast<Eigen::Index>(ch) * oh + oy) * ow + ox;
          y.values(b, o) = best;
          arg_[static_cast<std::size_t>(b * c * oh * ow + o)] = best_idx;
        }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  const int c = in_dims_[0], h = in_dims_[1], w = in_dims_[2];
  Tensor dx;
  dx.dims = in_dims_;
  dx.values = Eigen::MatrixXd::Zero(batch_, static_cast<Eigen::Index>(c) * h * w);
  const Eigen::Index per = dy.values.cols();
  for (Eigen::Index b = 0; b < batch_; ++b)
    for (Eigen::Index o = 0; o < per; ++o)
      dx.values(b, arg_[static_cast<std::size_t>(b * per + o)]) += dy.values(b, o);
  return dx;
}

Tensor Flatten::forward(const Tensor& x, bool) {
  in_dims_ = x.dims;
  Tensor y = x;
  y.dims = {static_cast<int>(x.features())};
  return y;
}

Tensor Flatten::backward(const Tensor& dy) {
  Tensor dx = dy;
  dx.dims = in_dims_;
  return dx;
}

BatchNorm1d::BatchNorm1d(int features, double lr, double momentum, double eps)
    : lr_(lr),
      momentum_(momentum),
      eps_(eps),
      gamma_(Eigen::VectorXd::Ones(features)),
      beta_(Eigen::VectorXd::Zero(features)),
      running_mean_(Eigen::VectorXd::Zero(features)),
      running_var_(Eigen::VectorXd::Ones(features)) {}

Tensor BatchNorm1d::forward(const Tensor& x, bool training) {
  const double n = static_cast<double>(x.batch());
  Tensor y = x;
  if (training) {
    batch_mean_ = x.values.colwise().mean().transpose();
    Eigen::MatrixXd centered = x.values.rowwise() - batch_mean_.transpose();
    Eigen::VectorXd var = (centered.array().square().colwise().sum() / n).transpose();
    batch_invstd_ = (var.array() + eps_).rsqrt().matrix();
    xhat_ = (centered.array().rowwise() * batch_invstd_.transpose().array()).matrix();
    running_mean_ = (1.0 - momentum_) * running_mean_ + momentum_ * batch_mean_;
    running_var_ = (1.0 - momentum_) * running_var_ + momentum_ * var;
  } else {
    Eigen::VectorXd invstd = (running_var_.array() + eps_).rsqrt().matrix();
    Eigen::MatrixXd centered = x.values.rowwise() - running_mean_.transpose();
    xhat_ = (centered.array().rowwise() * invstd.transpose().array()).matrix();
  }
  Eigen::MatrixXd scaled =
      (xhat_.array().rowwise() * gamma_.transpose().array()).matrix();
  y.values = scaled.rowwise() + beta_.transpose();
  return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy) {
  const double n = static_cast<double>(dy.batch());
  dgamma_ = dy.values.cwiseProduct(xhat_).colwise().sum().transpose();
  dbeta_ = dy.values.colwise().sum().transpose();
  Eigen::MatrixXd dxhat =
      (dy.values.array().rowwise() * gamma_.transpose().array()).matrix();
  Eigen::VectorXd sum_dxhat = dxhat.colwise().sum().transpose();
  Eigen::VectorXd sum_dxhat_xhat = dxhat.cwiseProduct(xhat_).colwise().sum().transpose();

  Eigen::MatrixXd term = dxhat * n;
  term = term.rowwise() - sum_dxhat.transpose();
  term -= (xhat_.array().rowwise() * sum_dxhat_xhat.transpose().array()).matrix();
  Tensor dx = dy;
  dx.values =
      (term.array().rowwise() * (batch_invstd_.transpose().array() / n)).matrix();
  return dx;
}

void BatchNorm1d::apply_updates(std::uint64_t) {
  gamma_ -= lr_ * dgamma_;
  beta_ -= lr_ * dbeta_;
}

}  // namespace xbarsim::nn
