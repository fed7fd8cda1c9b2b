#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace xbarsim::nn {

struct Dataset {
  Eigen::MatrixXd X;        // n x flat features, values in [0, 1]
  std::vector<int> labels;  // n entries in [0, classes)
  std::vector<int> dims;    // per-sample dims
  int classes = 0;

  Eigen::Index size() const { return X.rows(); }
};

/// Seeded Gaussian blobs: `classes` cluster means placed inside the unit box,
/// samples clipped to [0, 1].
Dataset make_blobs(int n, int features, int classes, double sigma,
                   std::uint64_t seed);

/// CSV rows of "label,p0,p1,...". Pixel values are divided by 255.
Dataset load_csv(const std::string& path, int classes = 0);

/// IDX image/label pair (big-endian magic 0x00000803 / 0x00000801), pixels
/// divided by 255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace xbarsim::nn
