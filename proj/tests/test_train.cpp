#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "fedscore/model.hpp"
#include "fedscore/train.hpp"

using namespace fedscore;

namespace {

Dataset tiny_dataset(int dim, int classes, std::size_t n, Rng& rng) {
  Dataset d;
  d.dim = dim;
  d.classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) {
      d.features.push_back(rng.normal());
    }
    d.labels.push_back(static_cast<int>(rng.uniform_int(classes)));
  }
  return d;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters untouched") {
  Rng rng(3);
  const Dataset d = tiny_dataset(3, 2, 10, rng);
  const ModelParams start = init_params(Arch{3, 0, 2}, rng);
  TrainingHyperParams hp;
  hp.learning_rate = 0.0;
  hp.local_steps = 5;
  const ModelParams end = local_train(start, d, hp, rng.fork("t"));
  CHECK(end.values == start.values);
}

TEST_CASE("one full-batch step is plain gradient descent") {
  Rng rng(5);
  const Dataset d = tiny_dataset(4, 3, 12, rng);
  const ModelParams start = init_params(Arch{4, 0, 3}, rng);
  TrainingHyperParams hp;
  hp.learning_rate = 0.3;
  hp.local_steps = 1;
  const ModelParams end = local_train(start, d, hp, rng.fork("t"));
  const auto g = loss_gradient(start, d);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(end.values[j] == doctest::Approx(start.values[j] - 0.3 * g[j]).epsilon(1e-14));
  }
}

TEST_CASE("momentum and decay follow the hand recursion") {
  Rng rng(7);
  const Dataset d = tiny_dataset(3, 2, 9, rng);
  const ModelParams start = init_params(Arch{3, 0, 2}, rng);
  TrainingHyperParams hp;
  hp.learning_rate = 0.2;
  hp.lr_decay = 0.5;
  hp.momentum = 0.9;
  hp.local_steps = 3;  // full batch: each step is one epoch
  const ModelParams end = local_train(start, d, hp, rng.fork("t"));

  ModelParams w = start;
  std::vector<double> v(w.values.size(), 0.0);
  for (int step = 0; step < 3; ++step) {
    const double lr = 0.2 * std::pow(0.5, step);
    const auto g = loss_gradient(w, d);
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = 0.9 * v[j] + g[j];
      w.values[j] -= lr * v[j];
    }
  }
  for (std::size_t j = 0; j < w.values.size(); ++j) {
    CHECK(end.values[j] == doctest::Approx(w.values[j]).epsilon(1e-12));
  }
}

TEST_CASE("a strong proximal pull keeps the round anchored") {
  Rng rng(9);
  const Dataset d = tiny_dataset(3, 2, 30, rng);
  const ModelParams start = init_params(Arch{3, 0, 2}, rng);
  TrainingHyperParams base;
  base.learning_rate = 0.1;
  base.local_steps = 20;
  TrainingHyperParams prox = base;
  prox.proximal_mu = 8.0;  // keep lr * mu < 1 so the explicit step contracts

  const ModelParams free_end = local_train(start, d, base, rng.fork("t"));
  const ModelParams prox_end = local_train(start, d, prox, rng.fork("t"));
  std::vector<double> free_delta(start.values.size());
  std::vector<double> prox_delta(start.values.size());
  for (std::size_t j = 0; j < start.values.size(); ++j) {
    free_delta[j] = free_end.values[j] - start.values[j];
    prox_delta[j] = prox_end.values[j] - start.values[j];
  }
  CHECK(l2_norm(prox_delta) < 0.2 * l2_norm(free_delta));
}

TEST_CASE("minibatch order is reproducible and full batch ignores the rng") {
  Rng rng(11);
  const Dataset d = tiny_dataset(3, 2, 16, rng);
  const ModelParams start = init_params(Arch{3, 0, 2}, rng);
  TrainingHyperParams hp;
  hp.learning_rate = 0.1;
  hp.local_steps = 4;
  hp.batch_size = 4;
  const ModelParams a = local_train(start, d, hp, rng.fork("same"));
  const ModelParams b = local_train(start, d, hp, rng.fork("same"));
  CHECK(a.values == b.values);
  const ModelParams c = local_train(start, d, hp, rng.fork("other"));
  CHECK(a.values != c.values);

  // Full batch: two different streams give identical results.
  hp.batch_size = 0;
  const ModelParams e = local_train(start, d, hp, rng.fork("x"));
  const ModelParams f = local_train(start, d, hp, rng.fork("y"));
  CHECK(e.values == f.values);
}

TEST_CASE("epochs advance after ceil(n / batch) steps") {
  Rng rng(13);
  const Dataset d = tiny_dataset(2, 2, 6, rng);
  const ModelParams start = init_params(Arch{2, 0, 2}, rng);
  // batch 4 over 6 rows: 2 steps per epoch. With decay 0.5 and 3 steps, the
  // third step must use half the learning rate. Check indirectly by matching
  // a manual replay with the same stream.
  TrainingHyperParams hp;
  hp.learning_rate = 0.4;
  hp.lr_decay = 0.5;
  hp.local_steps = 3;
  hp.batch_size = 4;
  const ModelParams end = local_train(start, d, hp, rng.fork("t"));

  Rng replay = rng.fork("t");
  ModelParams w = start;
  std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
  int step = 0;
  for (int epoch = 0; step < 3; ++epoch) {
    replay.shuffle(order);
    for (std::size_t off = 0; off < 6 && step < 3; off += 4, ++step) {
      const std::size_t hi = std::min<std::size_t>(off + 4, 6);
      const std::vector<std::size_t> batch(order.begin() + off, order.begin() + hi);
      const auto g = loss_gradient(w, d, batch);
      const double lr = 0.4 * std::pow(0.5, epoch);
      for (std::size_t j = 0; j < w.values.size(); ++j) {
        w.values[j] -= lr * g[j];
      }
    }
  }
  for (std::size_t j = 0; j < w.values.size(); ++j) {
    CHECK(end.values[j] == doctest::Approx(w.values[j]).epsilon(1e-12));
  }
}

TEST_CASE("hyperparameter ranges are enforced") {
  Rng rng(15);
  const Dataset d = tiny_dataset(2, 2, 4, rng);
  const ModelParams start = init_params(Arch{2, 0, 2}, rng);
  TrainingHyperParams hp;
  hp.learning_rate = -0.1;
  CHECK_THROWS_AS(local_train(start, d, hp, rng.fork("t")), std::invalid_argument);
  hp = {};
  hp.momentum = 1.0;
  CHECK_THROWS_AS(local_train(start, d, hp, rng.fork("t")), std::invalid_argument);
  hp = {};
  hp.lr_decay = 0.0;
  CHECK_THROWS_AS(local_train(start, d, hp, rng.fork("t")), std::invalid_argument);
  hp = {};
  hp.local_steps = 0;
  CHECK_THROWS_AS(local_train(start, d, hp, rng.fork("t")), std::invalid_argument);
}
