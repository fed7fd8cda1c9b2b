#include "xbarsim/converters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xbarsim/errors.hpp"

namespace xbarsim::converters {

void DacSpec::validate() const {
  if (bits < 1 || bits > 32)
    throw std::invalid_argument("DacSpec: bits must be in [1, 32]");
  if (!(v_fs > 0)) throw std::invalid_argument("DacSpec: v_fs must be > 0");
  if (stream_bits < 1) throw std::invalid_argument("DacSpec: stream_bits must be >= 1");
  if (!transfer.empty()) {
    if (transfer.size() != (std::size_t{1} << bits))
      throw std::invalid_argument("DacSpec: transfer table must have 2^bits entries");
    if (transfer.front() != 0.0)
      throw std::invalid_argument("DacSpec: transfer[0] must be 0");
    if (transfer.back() > v_fs)
      throw std::invalid_argument("DacSpec: transfer must not exceed v_fs");
    if (!std::is_sorted(transfer.begin(), transfer.end()))
      throw std::invalid_argument("DacSpec: transfer table must be monotone");
  }
}

double dac_encode(std::uint64_t x, const DacSpec& spec) {
  const std::uint64_t levels = (std::uint64_t{1} << spec.bits) - 1;
  if (x > levels)
    throw std::invalid_argument("dac_encode: code out of range for DAC precision");
  if (!spec.transfer.empty()) return spec.transfer[static_cast<std::size_t>(x)];
  if (x == 0) return 0.0;
  return static_cast<double>(x) / static_cast<double>(levels) * spec.v_fs;
}

std::vector<StreamSlice> stream_slices(std::uint64_t x, int total_bits,
                                       int stream_bits) {
  if (total_bits < 1 || total_bits > 63 || stream_bits < 1)
    throw std::invalid_argument("stream_slices: invalid bit widths");
  if (total_bits % stream_bits != 0)
    throw std::invalid_argument("stream_slices: total_bits must be divisible by stream_bits");
  if (total_bits < 63 && x >= (std::uint64_t{1} << total_bits))
    throw std::invalid_argument("stream_slices: value does not fit in total_bits");

  const int n = total_bits / stream_bits;
  const std::uint64_t mask = (std::uint64_t{1} << stream_bits) - 1;
  std::vector<StreamSlice> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = {x & mask,
                                        std::uint64_t{1} << (k * stream_bits)};
    x >>= stream_bits;
  }
  return out;
}

void AdcSpec::validate() const {
  if (bits < 0 || bits > 32)
    throw std::invalid_argument("AdcSpec: bits must be in [0, 32]");
  if (!(clip_percentile > 0.0) || clip_percentile > 1.0)
    throw std::invalid_argument("AdcSpec: clip_percentile must be in (0, 1]");
  if (!transfer.empty()) {
    if (bits == 0)
      throw std::invalid_argument("AdcSpec: transfer table with pass-through ADC");
    if (!std::is_sorted(transfer.begin(), transfer.end()))
      throw std::invalid_argument("AdcSpec: transfer thresholds must be monotone");
  }
}

std::uint64_t adc_quantize(double i, const AdcSpec& spec) {
  if (spec.passthrough())
    throw StateError("adc_quantize: pass-through ADC has no codes");
  if (i < 0.0 || !std::isfinite(i))
    throw std::invalid_argument("adc_quantize: current must be finite and >= 0");
  const std::uint64_t max_code = (std::uint64_t{1} << spec.bits) - 1;
  if (!spec.transfer.empty()) {
    // Highest threshold not exceeding i.
    auto it = std::upper_bound(spec.transfer.begin(), spec.transfer.end(), i);
    if (it == spec.transfer.begin()) return 0;
    std::uint64_t code = static_cast<std::uint64_t>((it - spec.transfer.begin()) - 1);
    return std::min(code, max_code);
  }
  if (!(spec.i_fs > 0))
    throw StateError("adc_quantize: i_fs not set (calibrate first)");
  const double scaled = i / spec.i_fs * static_cast<double>(max_code);
  if (scaled >= static_cast<double>(max_code)) return max_code;
  return static_cast<std::uint64_t>(std::llround(scaled));
}

void AdcCalibrator::observe(double i) {
  if (!std::isfinite(i) || i < 0.0)
    throw std::invalid_argument("AdcCalibrator: current must be finite and >= 0");
  samples_.push_back(i);
}

double AdcCalibrator::calibrate(double clip_percentile) const {
  if (samples_.empty())
    throw StateError("AdcCalibrator: no observations to calibrate from");
  if (!(clip_percentile > 0.0) || clip_percentile > 1.0)
    throw std::invalid_argument("AdcCalibrator: clip_percentile must be in (0, 1]");
  std::vector<double> sorted = samples_;
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(clip_percentile * static_cast<double>(n));
  if (rank >= n) rank = n - 1;
  return sorted[rank];
}

double calibrate_adc(const AdcCalibrator& cal, double clip_percentile) {
  return cal.calibrate(clip_percentile);
}

}  // namespace xbarsim::converters
