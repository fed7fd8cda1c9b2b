#pragma once

#include <vector>

#include <Eigen/Dense>

namespace xbarsim::nn {

/// Minibatch tensor: one row per sample, per-sample dims in `dims`
/// (e.g. {features} for dense data, {c, h, w} for images). `bits` and
/// `full_scale` describe the fixed-point grid the values currently live on
/// (bits == 0: unquantized).
struct Tensor {
  Eigen::MatrixXd values;
  std::vector<int> dims;
  int bits = 0;
  double full_scale = 0.0;

  Eigen::Index batch() const { return values.rows(); }
  Eigen::Index features() const { return values.cols(); }
};

/// Unsigned fixed-point codes for activations: clamp(round(x / step), 0,
/// 2^bits - 1) with step = full_scale / (2^bits - 1). Negative inputs
/// saturate at 0.
Eigen::MatrixXi quantize_unsigned_codes(const Eigen::MatrixXd& x, int bits,
                                        double full_scale);

/// Values back from unsigned codes.
Eigen::MatrixXd codes_to_values(const Eigen::MatrixXi& codes, int bits,
                                double full_scale);

/// Signed sign-magnitude quantization for errors; magnitude codes on
/// bits, dynamic scale supplied by the caller. scale <= 0 yields all zeros.
struct SignedCodes {
  Eigen::MatrixXi magnitude;
  Eigen::MatrixXi sign;  // -1, 0, +1
};
SignedCodes quantize_signed_codes(const Eigen::MatrixXd& x, int bits, double scale);

}  // namespace xbarsim::nn
