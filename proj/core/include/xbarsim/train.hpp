#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "xbarsim/dataset.hpp"
#include "xbarsim/layers.hpp"

namespace xbarsim::nn {

/// Softmax cross-entropy over logits; returns the mean loss and writes the
/// logit gradient (already divided by the batch size).
double softmax_cross_entropy(const Eigen::MatrixXd& logits,
                             const std::vector<int>& labels,
                             Eigen::MatrixXd& dlogits);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double wall_seconds = 0.0;
  long engine_refreshes = 0;
  double conversion_seconds = 0.0;
  bool diverged = false;
};

/// Layer stack plus the minibatch counters; the iteration counter advances
/// exactly once per minibatch.
class Network {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }

  Tensor forward(Tensor x, bool training);
  Tensor backward(Tensor dy);
  void apply_updates();

  std::uint64_t iteration() const { return iteration_; }
  long total_refreshes();
  double total_conversion_seconds();

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::uint64_t iteration_ = 0;
};

/// One epoch of minibatch SGD through the crossbar pipeline: forward, loss,
/// backward, per-layer update, non-ideal conductance regeneration. A
/// non-finite loss is recorded as divergence and the minibatch's update is
/// skipped, not raised.
class Trainer {
 public:
  Trainer(Network& net, int batch_size, std::uint64_t seed);

  EpochMetrics run_epoch(const Dataset& train, const Dataset& test, int epoch);
  double evaluate(const Dataset& test);

  const std::vector<double>& iteration_losses() const { return iteration_losses_; }
  bool diverged() const { return diverged_; }

 private:
  Tensor batch_tensor(const Dataset& d, const std::vector<int>& idx, int begin,
                      int end, std::vector<int>& labels) const;
  void shuffle(std::vector<int>& idx);

  Network& net_;
  int batch_size_;
  std::mt19937_64 rng_;
  std::vector<double> iteration_losses_;
  bool diverged_ = false;
};

/// Forward-only accuracy on a test set; no state mutation.
double evaluate(Network& net, const Dataset& test);

}  // namespace xbarsim::nn
