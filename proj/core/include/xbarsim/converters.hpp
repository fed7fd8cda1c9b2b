#pragma once

#include <cstdint>
#include <vector>

namespace xbarsim::converters {

/// Digital-to-analog converter model. With no transfer table the code maps
/// linearly onto [0, v_fs]; a table of 2^bits voltages (monotone, starting
/// at 0, capped at v_fs) supplies measured non-linearity instead.
struct DacSpec {
  int bits = 1;
  double v_fs = 1.0;
  std::vector<double> transfer;  // empty -> ideal linear
  int stream_bits = 1;           // bits per streamed input slice

  bool ideal_linear() const { return transfer.empty(); }
  void validate() const;
};

/// Volts for a digital input code.
double dac_encode(std::uint64_t x, const DacSpec& spec);

struct StreamSlice {
  std::uint64_t value;   // slice digit, < 2^stream_bits
  std::uint64_t weight;  // 2^(k * stream_bits), LSB slice first
};

/// Base-2^stream_bits digit expansion of x, LSB first. The weighted digit
/// sum reconstructs x exactly.
std::vector<StreamSlice> stream_slices(std::uint64_t x, int total_bits,
                                       int stream_bits);

/// Analog-to-digital converter model. bits == 0 disables quantization
/// (pass-through ideal converter, used by the ideal-crossbar configuration).
/// i_fs <= 0 marks a converter whose full scale still has to be calibrated
/// from observed current statistics.
struct AdcSpec {
  int bits = 8;
  double i_fs = 0.0;
  std::vector<double> transfer;  // optional code thresholds (amperes, monotone)
  double clip_percentile = 0.999;

  bool passthrough() const { return bits == 0; }
  void validate() const;
};

/// Digital code for a column current. Linear default:
/// clamp(round(i / i_fs * (2^bits - 1)), 0, 2^bits - 1); a threshold table
/// overrides (code = highest threshold not exceeding i). Saturation is the
/// defined behavior beyond full scale.
std::uint64_t adc_quantize(double i, const AdcSpec& spec);

/// Collects observed column currents until the data-dependent ADC full scale
/// is frozen. Single-writer while collecting.
class AdcCalibrator {
 public:
  void observe(double i);
  std::size_t sample_count() const { return samples_.size(); }

  /// The clip_percentile quantile (nearest-rank) of the observed currents.
  double calibrate(double clip_percentile) const;

 private:
  std::vector<double> samples_;
};

/// Free-function form of AdcCalibrator::calibrate.
double calibrate_adc(const AdcCalibrator& cal, double clip_percentile);

}  // namespace xbarsim::converters
