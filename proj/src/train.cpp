#include "fedscore/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedscore {

namespace {

void check_hyperparams(const TrainingHyperParams& hp) {
  if (!(hp.learning_rate >= 0.0) || !std::isfinite(hp.learning_rate)) {
    throw std::invalid_argument("train: learning_rate must be >= 0");
  }
  if (!(hp.lr_decay > 0.0) || hp.lr_decay > 1.0) {
    throw std::invalid_argument("train: lr_decay must be in (0, 1]");
  }
  if (!(hp.momentum >= 0.0) || hp.momentum >= 1.0) {
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  }
  if (hp.proximal_mu < 0.0) {
    throw std::invalid_argument("train: proximal_mu must be >= 0");
  }
  if (hp.local_steps < 1) {
    throw std::invalid_argument("train: local_steps must be >= 1");
  }
  if (hp.batch_size < 0) {
    throw std::invalid_argument("train: batch_size must be >= 0");
  }
}

}  // namespace

double effective_learning_rate(const TrainingHyperParams& hp, int epoch) {
  return hp.learning_rate * std::pow(hp.lr_decay, epoch);
}

ModelParams local_train(const ModelParams& start, const Dataset& data,
                        const TrainingHyperParams& hp, Rng rng) {
  check_hyperparams(hp);
  if (data.rows() == 0) {
    throw std::invalid_argument("train: dataset is empty");
  }

  const std::size_t n = data.rows();
  const std::size_t batch =
      hp.batch_size == 0 ? n : std::min<std::size_t>(static_cast<std::size_t>(hp.batch_size), n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;

  ModelParams w = start;
  std::vector<double> velocity(w.values.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int step = 0; step < hp.local_steps; ++step) {
    const std::size_t epoch = static_cast<std::size_t>(step) / steps_per_epoch;
    const std::size_t pos = static_cast<std::size_t>(step) % steps_per_epoch;
    if (pos == 0 && batch < n) {
      rng.shuffle(order);
    }
    const std::size_t begin = pos * batch;
    const std::size_t count = std::min(batch, n - begin);
    const double lr = effective_learning_rate(hp, static_cast<int>(epoch));

    std::vector<double> g =
        loss_gradient(w, data, {order.data() + begin, count},
                      hp.proximal_mu > 0.0 ? &start : nullptr, hp.proximal_mu);
    for (std::size_t i = 0; i < w.values.size(); ++i) {
      velocity[i] = hp.momentum * velocity[i] + g[i];
      w.values[i] -= lr * velocity[i];
    }
  }

  if (!all_finite(w.values)) {
    throw std::runtime_error("train: parameters diverged to non-finite values");
  }
  return w;
}

}  // namespace fedscore
