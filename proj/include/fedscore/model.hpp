#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedscore/dataset.hpp"
#include "fedscore/rng.hpp"

namespace fedscore {

// Classifier shape. hidden == 0 is multinomial logistic regression; hidden > 0
// adds one tanh layer.
struct Arch {
  int input_dim = 0;
  int hidden = 0;
  int classes = 2;

  std::size_t param_count() const;
  bool operator==(const Arch&) const = default;
};

// Flat parameter vector, layer by layer:
//   logistic: W [classes x input_dim] row-major, then bias [classes]
//   mlp:      W1 [hidden x input_dim], b1 [hidden], W2 [classes x hidden], b2 [classes]
struct ModelParams {
  Arch arch;
  std::vector<double> values;
};

ModelParams zero_params(const Arch& arch);

// Per-layer uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)].
ModelParams init_params(const Arch& arch, Rng& rng);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Mean softmax cross-entropy and argmax accuracy over a nonempty dataset.
// Ties in the argmax go to the lowest class index.
EvalResult forward_loss(const ModelParams& params, const Dataset& data);

// Gradient of the mean cross-entropy over the given rows, plus the gradient
// of (mu/2) * ||params - anchor||^2 when mu > 0.
std::vector<double> loss_gradient(const ModelParams& params, const Dataset& data,
                                  std::span<const std::size_t> rows,
                                  const ModelParams* proximal_anchor = nullptr,
                                  double proximal_mu = 0.0);

// Full-batch variant over every row.
std::vector<double> loss_gradient(const ModelParams& params, const Dataset& data,
                                  const ModelParams* proximal_anchor = nullptr,
                                  double proximal_mu = 0.0);

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);

// cos(a, b); 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);

}  // namespace fedscore
