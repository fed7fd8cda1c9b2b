#include "xbarsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace xbarsim::nn {

Dataset make_blobs(int n, int features, int classes, double sigma,
                   std::uint64_t seed) {
  if (n < 1 || features < 1 || classes < 2)
    throw std::invalid_argument("make_blobs: need n >= 1, features >= 1, classes >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Unit-norm direction per class, scaled into the [0,1] box around 0.5.
  Eigen::MatrixXd means(classes, features);
  for (int c = 0; c < classes; ++c) {
    double norm2 = 0.0;
    for (int f = 0; f < features; ++f) {
      double v = unit(rng);
      means(c, f) = v;
      norm2 += v * v;
    }
    double norm = std::sqrt(std::max(norm2, 1e-12));
    for (int f = 0; f < features; ++f)
      means(c, f) = 0.5 + 0.35 * means(c, f) / norm;
  }

  Dataset d;
  d.X.resize(n, features);
  d.labels.resize(static_cast<std::size_t>(n));
  d.dims = {features};
  d.classes = classes;
  for (int i = 0; i < n; ++i) {
    int c = i % classes;  // balanced
    d.labels[static_cast<std::size_t>(i)] = c;
    for (int f = 0; f < features; ++f) {
      double v = means(c, f) + noise(rng);
      d.X(i, f) = std::clamp(v, 0.0, 1.0);
    }
  }
  return d;
}

Dataset load_csv(const std::string& path, int classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    int label = 0;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        label = std::stoi(cell);
        first = false;
      } else {
        row.push_back(std::stod(cell) / 255.0);
      }
    }
    if (row.empty()) throw std::runtime_error("load_csv: row with no pixels");
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("load_csv: ragged rows");
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  if (rows.empty()) throw std::runtime_error("load_csv: empty file " + path);

  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto f = static_cast<Eigen::Index>(rows.front().size());
  d.X.resize(n, f);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < f; ++j)
      d.X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  d.labels = std::move(labels);
  d.dims = {static_cast<int>(f)};
  d.classes = classes > 0
                  ? classes
                  : 1 + *std::max_element(d.labels.begin(), d.labels.end());
  return d;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("load_idx: truncated header in " + path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("load_idx: cannot open " + images_path);
  if (read_be32(imgs, images_path) != 0x00000803u)
    throw std::runtime_error("load_idx: bad image magic in " + images_path);
  const std::uint32_t n = read_be32(imgs, images_path);
  const std::uint32_t rows = read_be32(imgs, images_path);
  const std::uint32_t cols = read_be32(imgs, images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw std::runtime_error("load_idx: cannot open " + labels_path);
  if (read_be32(labs, labels_path) != 0x00000801u)
    throw std::runtime_error("load_idx: bad label magic in " + labels_path);
  if (read_be32(labs, labels_path) != n)
    throw std::runtime_error("load_idx: image/label count mismatch");

  Dataset d;
  d.X.resize(n, static_cast<Eigen::Index>(rows * cols));
  d.labels.resize(n);
  d.dims = {1, static_cast<int>(rows), static_cast<int>(cols)};
  std::vector<unsigned char> buf(rows * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error("load_idx: truncated image data");
    for (std::size_t p = 0; p < buf.size(); ++p)
      d.X(i, static_cast<Eigen::Index>(p)) = buf[p] / 255.0;
    char lab;
    if (!labs.read(&lab, 1)) throw std::runtime_error("load_idx: truncated labels");
    d.labels[i] = static_cast<unsigned char>(lab);
  }
  d.classes = 1 + *std::max_element(d.labels.begin(), d.labels.end());
  return d;
}

}  // namespace xbarsim::nn
