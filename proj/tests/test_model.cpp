#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"

#include "fedscore/model.hpp"

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

// Central finite difference of the mean loss in one coordinate.
double fd_coordinate(const ModelParams& params, const Dataset& data, std::size_t j,
                     double h = 1e-5) {
  ModelParams plus = params;
  ModelParams minus = params;
  plus.values[j] += h;
  minus.values[j] -= h;
  return (forward_loss(plus, data).loss - forward_loss(minus, data).loss) / (2.0 * h);
}

}  // namespace

TEST_CASE("param_count matches the layer layout") {
  CHECK(Arch{4, 0, 3}.param_count() == 4 * 3 + 3);
  CHECK(Arch{4, 5, 3}.param_count() == 4 * 5 + 5 + 5 * 3 + 3);
}

TEST_CASE("zero parameters give log(classes) loss") {
  Rng rng(11);
  for (int classes : {2, 3, 7}) {
    const Dataset d = tiny_dataset(3, classes, 40, rng);
    const ModelParams p = zero_params(Arch{3, 0, classes});
    const EvalResult r = forward_loss(p, d);
    CHECK(r.loss == doctest::Approx(std::log(classes)).epsilon(1e-12));
  }
}

TEST_CASE("argmax ties resolve to the lowest class") {
  Dataset d;
  d.dim = 1;
  d.classes = 3;
  d.features = {1.0, 1.0};
  d.labels = {0, 2};
  const ModelParams p = zero_params(Arch{1, 0, 3});
  // All logits equal: predicted class is 0 for both rows.
  CHECK(forward_loss(p, d).accuracy == doctest::Approx(0.5));
}

TEST_CASE("binary logistic loss matches the closed form") {
  // One sample x, label 0, weights only on class 0: softmax CE reduces to
  // log(1 + exp(-w x)).
  Dataset d;
  d.dim = 1;
  d.classes = 2;
  d.features = {0.7};
  d.labels = {0};
  ModelParams p = zero_params(Arch{1, 0, 2});
  p.values[0] = 1.3;  // W[0][0]
  const double expected = std::log(1.0 + std::exp(-1.3 * 0.7));
  CHECK(forward_loss(p, d).loss == doctest::Approx(expected).epsilon(1e-12));
  CHECK(forward_loss(p, d).accuracy == doctest::Approx(1.0));
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(21);
  for (int hidden : {0, 5}) {
    const Arch arch{4, hidden, 3};
    for (int rep = 0; rep < 10; ++rep) {
      const Dataset d = tiny_dataset(4, 3, 25, rng);
      Rng init = rng.fork("init", hidden, rep);
      const ModelParams p = init_params(arch, init);
      const auto g = loss_gradient(p, d);
      REQUIRE(g.size() == arch.param_count());
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double fd = fd_coordinate(p, d, j);
        const double scale = std::max({std::fabs(fd), std::fabs(g[j]), 1e-8});
        CHECK(std::fabs(g[j] - fd) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("proximal term adds mu times the anchor offset") {
  Rng rng(31);
  const Arch arch{3, 0, 2};
  const Dataset d = tiny_dataset(3, 2, 12, rng);
  const ModelParams p = init_params(arch, rng);
  ModelParams anchor = init_params(arch, rng);
  const double mu = 0.37;
  const auto plain = loss_gradient(p, d);
  const auto prox = loss_gradient(p, d, &anchor, mu);
  for (std::size_t j = 0; j < plain.size(); ++j) {
    CHECK(prox[j] == doctest::Approx(plain[j] + mu * (p.values[j] - anchor.values[j]))
                         .epsilon(1e-12));
  }
}

TEST_CASE("row-subset gradient equals the weighted full gradient") {
  Rng rng(41);
  const Arch arch{3, 2, 3};
  const Dataset d = tiny_dataset(3, 3, 8, rng);
  const ModelParams p = init_params(arch, rng);
  const std::vector<std::size_t> front{0, 1, 2};
  const std::vector<std::size_t> back{3, 4, 5, 6, 7};
  const auto g_full = loss_gradient(p, d);
  const auto g_front = loss_gradient(p, d, front);
  const auto g_back = loss_gradient(p, d, back);
  for (std::size_t j = 0; j < g_full.size(); ++j) {
    CHECK(g_full[j] ==
          doctest::Approx((3.0 * g_front[j] + 5.0 * g_back[j]) / 8.0).epsilon(1e-10));
  }
}

TEST_CASE("init_params respects the fan-in bound") {
  Rng rng(51);
  const Arch arch{16, 8, 4};
  const ModelParams p = init_params(arch, rng);
  // W1 entries bounded by 1/sqrt(16).
  for (std::size_t j = 0; j < 16 * 8; ++j) {
    CHECK(std::fabs(p.values[j]) <= 0.25);
  }
  bool any_nonzero = false;
  for (double v : p.values) {
    any_nonzero = any_nonzero || v != 0.0;
  }
  CHECK(any_nonzero);
}

TEST_CASE("vector helpers behave at the edges") {
  const std::vector<double> a{3.0, 4.0};
  const std::vector<double> zero{0.0, 0.0};
  CHECK(l2_norm(a) == doctest::Approx(5.0));
  CHECK(squared_norm(a) == doctest::Approx(25.0));
  CHECK(dot(a, a) == doctest::Approx(25.0));
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(cosine_similarity(a, zero) == 0.0);
  CHECK(all_finite(a));
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK_FALSE(all_finite(bad));
}
