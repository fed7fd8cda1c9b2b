#include <doctest.h>

#include <cmath>
#include <random>

#include "xbarsim/fcm.hpp"
#include "xbarsim/mapping.hpp"

using namespace xbarsim;
using namespace xbarsim::mapping;

namespace {

circuit::CrossbarConfig base_cfg() {
  circuit::CrossbarConfig cfg;
  cfg.rows = 64;
  cfg.cols = 64;
  cfg.r_row = 1.0;
  cfg.r_col = 4.6;
  cfg.g_min = 1e-6;
  cfg.g_max = 1e-5;
  cfg.v_fs = 1.0;
  return cfg;
}

// Independent fixed-point quantizer: the value a weight_bits sign-magnitude
// representation stores, bypassing the slice/conductance machinery.
double quantize_ref(double w, double scale, int weight_bits) {
  const double levels = std::pow(2.0, weight_bits) - 1.0;
  double q = std::llround(std::abs(w) / scale * levels);
  if (q > levels) q = levels;
  double sw = scale / levels;
  return (w < 0 ? -1.0 : 1.0) * q * sw;
}

Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> dist(-amp, amp);
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace

TEST_CASE("map_weights: zero matrix parks every device pair at g_min") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 8;
  spec.device_bits = 2;
  spec.tile_rows = 8;
  spec.tile_cols = 8;
  auto t = map_weights(Eigen::MatrixXd::Zero(8, 8), spec, cfg);
  for (int s = 0; s < t.num_slices(); ++s) {
    CHECK(t.master_diff(s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t.master_polarity(s, Polarity::pos).array() == cfg.g_min).all());
    CHECK((t.master_polarity(s, Polarity::neg).array() == cfg.g_min).all());
  }
}

TEST_CASE("map_weights: full-scale positive weight saturates the pos device") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 2;
  spec.device_bits = 2;
  spec.tile_rows = 1;
  spec.tile_cols = 1;
  spec.w_max = 1.0;
  Eigen::MatrixXd W(1, 1);
  W(0, 0) = 1.0;
  auto t = map_weights(W, spec, cfg);
  CHECK(t.master_polarity(0, Polarity::pos)(0, 0) == cfg.g_max);
  CHECK(t.master_polarity(0, Polarity::neg)(0, 0) == cfg.g_min);
}

TEST_CASE("map_weights: 100x80 over 64x64 tiles gives a 2x2 grid and exact unmap") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 8;
  spec.device_bits = 2;
  spec.tile_rows = 64;
  spec.tile_cols = 64;
  std::mt19937_64 rng(7);
  Eigen::MatrixXd W = random_matrix(100, 80, rng);

  auto t = map_weights(W, spec, cfg);
  CHECK(t.grid_rows() == 2);
  CHECK(t.grid_cols() == 2);
  CHECK(t.padded_rows() == 128);
  CHECK(t.padded_cols() == 128);
  CHECK(t.num_slices() == 4);

  Eigen::MatrixXd back = t.implied_weights();
  REQUIRE(back.rows() == 100);
  REQUIRE(back.cols() == 80);
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 80; ++j) {
      double expect = quantize_ref(W(i, j), t.layer_scale(), spec.weight_bits);
      CHECK(back(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("map_weights: differential exclusivity on every slice") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 6;
  spec.device_bits = 3;
  spec.tile_rows = 16;
  spec.tile_cols = 16;
  std::mt19937_64 rng(11);
  auto t = map_weights(random_matrix(30, 20, rng), spec, cfg);
  for (int s = 0; s < t.num_slices(); ++s) {
    auto gp = t.master_polarity(s, Polarity::pos);
    auto gn = t.master_polarity(s, Polarity::neg);
    for (int i = 0; i < t.padded_rows(); ++i)
      for (int j = 0; j < t.padded_cols(); ++j) {
        bool pos_active = gp(i, j) > cfg.g_min;
        bool neg_active = gn(i, j) > cfg.g_min;
        CHECK(!(pos_active && neg_active));
      }
  }
}

TEST_CASE("map_weights: validation errors") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 8;
  spec.device_bits = 3;  // not a divisor
  spec.tile_rows = 8;
  spec.tile_cols = 8;
  CHECK_THROWS_AS(map_weights(Eigen::MatrixXd::Zero(4, 4), spec, cfg),
                  std::invalid_argument);

  spec.device_bits = 2;
  spec.tile_rows = 128;  // exceeds the 64-row crossbar
  CHECK_THROWS_AS(map_weights(Eigen::MatrixXd::Zero(4, 4), spec, cfg),
                  std::invalid_argument);

  spec.tile_rows = 8;
  Eigen::MatrixXd bad(2, 2);
  bad.setZero();
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(map_weights(bad, spec, cfg), std::invalid_argument);
}

TEST_CASE("apply_variation: identity at sigma 0, deterministic per seed") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 4;
  spec.device_bits = 2;
  spec.tile_rows = 16;
  spec.tile_cols = 16;
  std::mt19937_64 rng(13);
  auto t = map_weights(random_matrix(16, 16, rng), spec, cfg);

  auto same = apply_variation(t, 0.0, 99);
  CHECK(same.ideal_working(0, Polarity::pos) == t.master_polarity(0, Polarity::pos));

  auto a = apply_variation(t, 0.1, 42);
  auto b = apply_variation(t, 0.1, 42);
  CHECK(a.ideal_working(1, Polarity::neg) == b.ideal_working(1, Polarity::neg));
  auto c = apply_variation(t, 0.1, 43);
  CHECK(a.ideal_working(1, Polarity::neg) != c.ideal_working(1, Polarity::neg));

  CHECK_THROWS_AS(apply_variation(t, -0.1, 1), std::invalid_argument);
}

TEST_CASE("apply_variation: empirical spread matches sigma within 2%") {
  circuit::CrossbarConfig cfg = base_cfg();
  cfg.rows = 400;
  cfg.cols = 250;
  cfg.g_max = 1e-4;  // headroom so clamping never bites at mid-range
  MappingSpec spec;
  spec.weight_bits = 2;
  spec.device_bits = 2;
  spec.tile_rows = 400;
  spec.tile_cols = 250;
  spec.w_max = 1.0;
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(400, 250, 0.1);
  auto t = apply_variation(map_weights(W, spec, cfg), 0.1, 7);

  Eigen::MatrixXd base = t.master_polarity(0, Polarity::pos);
  Eigen::MatrixXd varied = t.ideal_working(0, Polarity::pos);
  Eigen::ArrayXXd ratio = varied.array() / base.array();
  const double n = static_cast<double>(ratio.size());
  double mean = ratio.sum() / n;
  double var = (ratio - mean).square().sum() / (n - 1.0);
  CHECK(std::sqrt(var) == doctest::Approx(0.1).epsilon(0.02));
  CHECK(mean == doctest::Approx(1.0).epsilon(0.002));
}

TEST_CASE("master state survives variation and conversion untouched") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 4;
  spec.device_bits = 2;
  spec.tile_rows = 8;
  spec.tile_cols = 8;
  std::mt19937_64 rng(17);
  auto t = map_weights(random_matrix(10, 6, rng), spec, cfg);
  Eigen::MatrixXd before = t.master_diff(0);

  auto varied = apply_variation(t, 0.2, 5);
  auto tile = varied.ideal_tile(0, Polarity::pos, 0, 0);
  (void)circuit::fcm_convert(tile);
  CHECK(varied.master_diff(0) == before);
  CHECK(t.master_diff(0) == before);
}

TEST_CASE("map_weights: padding cells sit at g_min in every tile") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 2;
  spec.device_bits = 2;
  spec.tile_rows = 4;
  spec.tile_cols = 4;
  std::mt19937_64 rng(19);
  auto t = map_weights(random_matrix(5, 3, rng), spec, cfg);
  CHECK(t.grid_rows() == 2);
  CHECK(t.grid_cols() == 1);
  auto tile = t.ideal_tile(0, Polarity::pos, 1, 0);
  // Rows 5..7 and column 3 of the padded layer are padding.
  for (int j = 0; j < 4; ++j)
    for (int i = 1; i < 4; ++i) CHECK(tile.g(i, j) == cfg.g_min);
}

TEST_CASE("reconstruct_output: recombination and cancellation") {
  MappingSpec spec;
  spec.weight_bits = 4;
  spec.device_bits = 2;

  std::vector<Eigen::VectorXd> zeros(2, Eigen::VectorXd::Zero(3));
  auto out = reconstruct_output(zeros, zeros, spec, 2.5);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  std::vector<Eigen::VectorXd> codes(2);
  codes[0] = Eigen::VectorXd::Constant(3, 7.0);
  codes[1] = Eigen::VectorXd::Constant(3, 2.0);
  auto cancel = reconstruct_output(codes, codes, spec, 1.0);
  CHECK(cancel.cwiseAbs().maxCoeff() == 0.0);

  std::vector<Eigen::VectorXd> neg(2, Eigen::VectorXd::Zero(3));
  auto val = reconstruct_output(codes, neg, spec, 0.5);
  for (int k = 0; k < 3; ++k)
    CHECK(val[k] == doctest::Approx(0.5 * (7.0 + 4.0 * 2.0)).epsilon(1e-15));

  std::vector<Eigen::VectorXd> missing(1, Eigen::VectorXd::Zero(3));
  CHECK_THROWS_AS(reconstruct_output(missing, neg, spec, 1.0), std::invalid_argument);
}

TEST_CASE("reconstruct_output: inverts the slice decomposition of mapped weights") {
  auto cfg = base_cfg();
  MappingSpec spec;
  spec.weight_bits = 8;
  spec.device_bits = 2;
  spec.tile_rows = 8;
  spec.tile_cols = 8;
  std::mt19937_64 rng(23);
  Eigen::MatrixXd W = random_matrix(1, 8, rng);
  auto t = map_weights(W, spec, cfg);

  // Codes = integer device levels read back from the master state.
  std::vector<Eigen::VectorXd> pos(4), neg(4);
  for (int s = 0; s < 4; ++s) {
    pos[s].resize(8);
    neg[s].resize(8);
    auto gp = t.master_polarity(s, Polarity::pos);
    auto gn = t.master_polarity(s, Polarity::neg);
    for (int j = 0; j < 8; ++j) {
      pos[s][j] = std::round((gp(0, j) - cfg.g_min) / t.level_step());
      neg[s][j] = std::round((gn(0, j) - cfg.g_min) / t.level_step());
    }
  }
  double scale = t.layer_scale() / 255.0;
  auto w_back = reconstruct_output(pos, neg, spec, scale);
  for (int j = 0; j < 8; ++j)
    CHECK(w_back[j] ==
          doctest::Approx(quantize_ref(W(0, j), t.layer_scale(), 8)).epsilon(1e-12));
}
