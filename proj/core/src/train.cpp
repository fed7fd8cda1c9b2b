#include "xbarsim/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace xbarsim::nn {

double softmax_cross_entropy(const Eigen::MatrixXd& logits,
                             const std::vector<int>& labels,
                             Eigen::MatrixXd& dlogits) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");

  dlogits.resize(n, c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) z += std::exp(logits(i, j) - m);
    const int y = labels[static_cast<std::size_t>(i)];
    total += -(logits(i, y) - m - std::log(z));
    for (Eigen::Index j = 0; j < c; ++j) {
      double p = std::exp(logits(i, j) - m) / z;
      dlogits(i, j) = (p - (j == y ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

Tensor Network::forward(Tensor x, bool training) {
  for (auto& layer : layers_) x = layer->forward(x, training);
  return x;
}

Tensor Network::backward(Tensor dy) {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    dy = (*it)->backward(dy);
  return dy;
}

void Network::apply_updates() {
  for (auto& layer : layers_) layer->apply_updates(iteration_);
  ++iteration_;
}

long Network::total_refreshes() {
  long total = 0;
  for (auto& layer : layers_)
    if (auto* c = layer->core()) total += c->refresh_count();
  return total;
}

double Network::total_conversion_seconds() {
  double total = 0.0;
  for (auto& layer : layers_)
    if (auto* c = layer->core()) total += c->conversion_seconds();
  return total;
}

Trainer::Trainer(Network& net, int batch_size, std::uint64_t seed)
    : net_(net), batch_size_(batch_size), rng_(seed) {
  if (batch_size < 1) throw std::invalid_argument("Trainer: batch_size must be >= 1");
}

void Trainer::shuffle(std::vector<int>& idx) {
  // Fisher-Yates with the trainer's own generator, so the visit order is a
  // pure function of the seed on every platform.
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng_() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

Tensor Trainer::batch_tensor(const Dataset& d, const std::vector<int>& idx, int begin,
                             int end, std::vector<int>& labels) const {
  Tensor x;
  x.dims = d.dims;
  x.values.resize(end - begin, d.X.cols());
  labels.resize(static_cast<std::size_t>(end - begin));
  for (int r = begin; r < end; ++r) {
    x.values.row(r - begin) = d.X.row(idx[static_cast<std::size_t>(r)]);
    labels[static_cast<std::size_t>(r - begin)] =
        d.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
  }
  return x;
}

EpochMetrics Trainer::run_epoch(const Dataset& train, const Dataset& test, int epoch) {
  if (train.size() == 0) throw std::invalid_argument("run_epoch: empty dataset");
  const auto t0 = std::chrono::steady_clock::now();
  const long refreshes_before = net_.total_refreshes();
  const double conversion_before = net_.total_conversion_seconds();

  std::vector<int> idx(static_cast<std::size_t>(train.size()));
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx);

  EpochMetrics m;
  m.epoch = epoch;
  double loss_sum = 0.0;
  int batches = 0;

  for (int begin = 0; begin < static_cast<int>(train.size()); begin += batch_size_) {
    const int end = std::min(begin + batch_size_, static_cast<int>(train.size()));
    std::vector<int> labels;
    Tensor x = batch_tensor(train, idx, begin, end, labels);

    Tensor logits = net_.forward(std::move(x), true);
    Eigen::MatrixXd dlogits;
    double loss = softmax_cross_entropy(logits.values, labels, dlogits);
    iteration_losses_.push_back(loss);
    ++batches;

    if (!std::isfinite(loss)) {
      // Divergence is an outcome, not an error: record it and freeze this
      // minibatch's update.
      m.diverged = true;
      diverged_ = true;
      continue;
    }
    loss_sum += loss;

    Tensor dy;
    dy.values = std::move(dlogits);
    dy.dims = logits.dims;
    (void)net_.backward(std::move(dy));
    net_.apply_updates();
  }

  m.train_loss = m.diverged || batches == 0
                     ? std::numeric_limits<double>::quiet_NaN()
                     : loss_sum / static_cast<double>(batches);
  m.test_accuracy = evaluate(test);
  m.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.engine_refreshes = net_.total_refreshes() - refreshes_before;
  m.conversion_seconds = net_.total_conversion_seconds() - conversion_before;
  return m;
}

double Trainer::evaluate(const Dataset& test) { return nn::evaluate(net_, test); }

double evaluate(Network& net, const Dataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  const int chunk = 256;
  long correct = 0;
  for (int begin = 0; begin < static_cast<int>(test.size()); begin += chunk) {
    const int end = std::min(begin + chunk, static_cast<int>(test.size()));
    Tensor x;
    x.dims = test.dims;
    x.values = test.X.middleRows(begin, end - begin);
    Tensor logits = net.forward(std::move(x), false);
    for (Eigen::Index i = 0; i < logits.values.rows(); ++i) {
      Eigen::Index best;
      logits.values.row(i).maxCoeff(&best);
      if (static_cast<int>(best) == test.labels[static_cast<std::size_t>(begin + i)])
        ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace xbarsim::nn
