#pragma once

#include <span>
#include <vector>

#include "core/random.hpp"
#include "core/zsl_base.hpp"

namespace hzsl {

// Shuffled mini-batch loop. `full_loss()` evaluates the objective on the
// whole training set; `step(batch, lr)` applies one update. Returns the loss
// before training followed by the loss after each epoch.
template <typename FullLoss, typename Step>
std::vector<double> run_minibatch_sgd(std::size_t n, const TrainConfig& config,
                                      FullLoss&& full_loss, Step&& step) {
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<double> trace;
  trace.reserve(config.epochs + 1);
  trace.push_back(full_loss());
  double lr = config.learning_rate;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    auto order = shuffled_indices(n, rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      step(std::span<const std::size_t>(order.data() + start, len), lr);
    }
    trace.push_back(full_loss());
    if (config.decay_every > 0 && epoch % config.decay_every == 0) {
      lr *= config.lr_decay;
    }
  }
  return trace;
}

}  // namespace hzsl
