#include "fedscore/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedscore {

namespace {

void check_arch(const Arch& arch) {
  if (arch.input_dim < 1 || arch.classes < 2 || arch.hidden < 0) {
    throw std::invalid_argument("model: arch must have input_dim >= 1, classes >= 2, hidden >= 0");
  }
}

void check_params(const ModelParams& params) {
  check_arch(params.arch);
  if (params.values.size() != params.arch.param_count()) {
    throw std::invalid_argument("model: parameter vector size does not match arch");
  }
}

void check_data(const ModelParams& params, const Dataset& data) {
  if (data.rows() == 0) {
    throw std::invalid_argument("model: dataset is empty");
  }
  if (data.dim != params.arch.input_dim) {
    throw std::invalid_argument("model: dataset dim does not match arch input_dim");
  }
}

// Writes class logits for one row; for the mlp also exposes the hidden
// activations needed by the backward pass.
void logits_for_row(const ModelParams& params, std::span<const double> x,
                    std::vector<double>& hidden_act, std::vector<double>& logits) {
  const Arch& a = params.arch;
  const double* w = params.values.data();
  const int d = a.input_dim;
  const int C = a.classes;
  if (a.hidden == 0) {
    const double* bias = w + static_cast<std::size_t>(C) * d;
    for (int c = 0; c < C; ++c) {
      logits[c] = bias[c] + dot({w + static_cast<std::size_t>(c) * d, static_cast<std::size_t>(d)}, x);
    }
    return;
  }
  const int h = a.hidden;
  const double* w1 = w;
  const double* b1 = w1 + static_cast<std::size_t>(h) * d;
  const double* w2 = b1 + h;
  const double* b2 = w2 + static_cast<std::size_t>(C) * h;
  for (int i = 0; i < h; ++i) {
    hidden_act[i] = std::tanh(b1[i] + dot({w1 + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)}, x));
  }
  for (int c = 0; c < C; ++c) {
    logits[c] = b2[c] + dot({w2 + static_cast<std::size_t>(c) * h, static_cast<std::size_t>(h)},
                            {hidden_act.data(), static_cast<std::size_t>(h)});
  }
}

// In place: logits -> softmax probabilities; returns log-sum-exp.
double softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) {
    v /= sum;
  }
  return m + std::log(sum);
}

}  // namespace

std::size_t Arch::param_count() const {
  const std::size_t d = static_cast<std::size_t>(input_dim);
  const std::size_t C = static_cast<std::size_t>(classes);
  if (hidden == 0) {
    return C * d + C;
  }
  const std::size_t h = static_cast<std::size_t>(hidden);
  return h * d + h + C * h + C;
}

ModelParams zero_params(const Arch& arch) {
  check_arch(arch);
  return {arch, std::vector<double>(arch.param_count(), 0.0)};
}

ModelParams init_params(const Arch& arch, Rng& rng) {
  ModelParams p = zero_params(arch);
  auto fill_layer = [&](std::size_t offset, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) {
      p.values[offset + i] = rng.uniform(-bound, bound);
    }
  };
  const std::size_t d = static_cast<std::size_t>(arch.input_dim);
  const std::size_t C = static_cast<std::size_t>(arch.classes);
  if (arch.hidden == 0) {
    fill_layer(0, C * d + C, arch.input_dim);
  } else {
    const std::size_t h = static_cast<std::size_t>(arch.hidden);
    fill_layer(0, h * d + h, arch.input_dim);
    fill_layer(h * d + h, C * h + C, arch.hidden);
  }
  return p;
}

EvalResult forward_loss(const ModelParams& params, const Dataset& data) {
  check_params(params);
  check_data(params, data);
  const int C = params.arch.classes;
  std::vector<double> hidden_act(std::max(params.arch.hidden, 1));
  std::vector<double> z(C);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const int y = data.labels[i];
    if (y < 0 || y >= C) {
      throw std::invalid_argument("model: label out of range");
    }
    logits_for_row(params, data.row(i), hidden_act, z);
    const int pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    const double logit_y = z[y];
    const double lse = softmax_inplace(z);
    loss += lse - logit_y;
    if (pred == y) {
      ++correct;
    }
  }
  const double n = static_cast<double>(data.rows());
  return {loss / n, static_cast<double>(correct) / n};
}

std::vector<double> loss_gradient(const ModelParams& params, const Dataset& data,
                                  std::span<const std::size_t> rows,
                                  const ModelParams* proximal_anchor, double proximal_mu) {
  check_params(params);
  check_data(params, data);
  if (rows.empty()) {
    throw std::invalid_argument("model: gradient needs at least one row");
  }
  if (proximal_mu > 0.0) {
    if (proximal_anchor == nullptr) {
      throw std::invalid_argument("model: proximal term needs an anchor");
    }
    if (!(proximal_anchor->arch == params.arch)) {
      throw std::invalid_argument("model: proximal anchor arch mismatch");
    }
  }

  const Arch& a = params.arch;
  const int d = a.input_dim;
  const int C = a.classes;
  const int h = a.hidden;
  std::vector<double> grad(params.values.size(), 0.0);
  std::vector<double> hidden_act(std::max(h, 1));
  std::vector<double> z(C);
  std::vector<double> delta1(std::max(h, 1));

  for (std::size_t r : rows) {
    if (r >= data.rows()) {
      throw std::invalid_argument("model: row index out of range");
    }
    const int y = data.labels[r];
    if (y < 0 || y >= C) {
      throw std::invalid_argument("model: label out of range");
    }
    const auto x = data.row(r);
    logits_for_row(params, x, hidden_act, z);
    softmax_inplace(z);
    z[y] -= 1.0;  // z now holds dLoss/dLogits for this row

    if (h == 0) {
      double* gw = grad.data();
      double* gb = gw + static_cast<std::size_t>(C) * d;
      for (int c = 0; c < C; ++c) {
        const double dc = z[c];
        double* gwc = gw + static_cast<std::size_t>(c) * d;
        for (int j = 0; j < d; ++j) {
          gwc[j] += dc * x[j];
        }
        gb[c] += dc;
      }
    } else {
      const double* w2 = params.values.data() + static_cast<std::size_t>(h) * d + h;
      double* gw1 = grad.data();
      double* gb1 = gw1 + static_cast<std::size_t>(h) * d;
      double* gw2 = gb1 + h;
      double* gb2 = gw2 + static_cast<std::size_t>(C) * h;
      for (int i = 0; i < h; ++i) {
        delta1[i] = 0.0;
      }
      for (int c = 0; c < C; ++c) {
        const double dc = z[c];
        const double* w2c = w2 + static_cast<std::size_t>(c) * h;
        double* gw2c = gw2 + static_cast<std::size_t>(c) * h;
        for (int i = 0; i < h; ++i) {
          gw2c[i] += dc * hidden_act[i];
          delta1[i] += dc * w2c[i];
        }
        gb2[c] += dc;
      }
      for (int i = 0; i < h; ++i) {
        delta1[i] *= 1.0 - hidden_act[i] * hidden_act[i];
        double* gw1i = gw1 + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
          gw1i[j] += delta1[i] * x[j];
        }
        gb1[i] += delta1[i];
      }
    }
  }

  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (double& g : grad) {
    g *= inv_n;
  }
  if (proximal_mu > 0.0) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] += proximal_mu * (params.values[i] - proximal_anchor->values[i]);
    }
  }
  return grad;
}

std::vector<double> loss_gradient(const ModelParams& params, const Dataset& data,
                                  const ModelParams* proximal_anchor, double proximal_mu) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_gradient(params, data, rows, proximal_anchor, proximal_mu);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

double l2_norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine_similarity: size mismatch");
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) {
    return 0.0;
  }
  return dot(a, b) / (na * nb);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace fedscore
