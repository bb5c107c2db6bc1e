#pragma once

#include "fedscore/dataset.hpp"
#include "fedscore/model.hpp"
#include "fedscore/rng.hpp"

namespace fedscore {

struct TrainingHyperParams {
  double learning_rate = 0.1;
  double lr_decay = 1.0;     // per-epoch multiplicative decay, in (0, 1]
  double momentum = 0.0;     // in [0, 1)
  double proximal_mu = 0.0;  // 0 disables the proximal pull toward the round start
  int local_steps = 1;       // minibatch SGD steps per round
  int batch_size = 0;        // 0 = full batch
};

// learning_rate * lr_decay^epoch, where an epoch is one full pass.
double effective_learning_rate(const TrainingHyperParams& hp, int epoch);

// Runs hp.local_steps SGD steps from `start` and returns the new parameters.
// Minibatches are sampled without replacement within an epoch; momentum
// follows v <- momentum * v + g, w <- w - lr * v. The proximal term anchors
// at `start`. The rng is taken by value: one stream, one training run.
ModelParams local_train(const ModelParams& start, const Dataset& data,
                        const TrainingHyperParams& hp, Rng rng);

}  // namespace fedscore
