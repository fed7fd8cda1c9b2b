#include "xbarsim/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace xbarsim::nn {

Eigen::MatrixXi quantize_unsigned_codes(const Eigen::MatrixXd& x, int bits,
                                        double full_scale) {
  if (bits < 1 || bits > 30)
    throw std::invalid_argument("quantize_unsigned_codes: bits must be in [1, 30]");
  if (!(full_scale > 0))
    throw std::invalid_argument("quantize_unsigned_codes: full_scale must be > 0");
  const double levels = static_cast<double>((1 << bits) - 1);
  const double step = full_scale / levels;
  Eigen::MatrixXi codes(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double q = std::llround(x(i, j) / step);
      if (q < 0) q = 0;
      if (q > levels) q = levels;
      codes(i, j) = static_cast<int>(q);
    }
  return codes;
}

Eigen::MatrixXd codes_to_values(const Eigen::MatrixXi& codes, int bits,
                                double full_scale) {
  const double step = full_scale / static_cast<double>((1 << bits) - 1);
  return codes.cast<double>() * step;
}

SignedCodes quantize_signed_codes(const Eigen::MatrixXd& x, int bits, double scale) {
  if (bits < 1 || bits > 30)
    throw std::invalid_argument("quantize_signed_codes: bits must be in [1, 30]");
  SignedCodes out;
  out.magnitude = Eigen::MatrixXi::Zero(x.rows(), x.cols());
  out.sign = Eigen::MatrixXi::Zero(x.rows(), x.cols());
  if (!(scale > 0)) return out;
  const double levels = static_cast<double>((1 << bits) - 1);
  const double step = scale / levels;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      double q = std::llround(std::abs(v) / step);
      if (q > levels) q = levels;
      out.magnitude(i, j) = static_cast<int>(q);
      out.sign(i, j) = q == 0 ? 0 : (v < 0 ? -1 : 1);
    }
  return out;
}

}  // namespace xbarsim::nn
