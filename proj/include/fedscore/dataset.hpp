#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedscore {

// Row-major feature matrix with integer class labels in [0, classes).
struct Dataset {
  int dim = 0;
  int classes = 0;
  std::vector<double> features;  // rows() * dim values
  std::vector<int> labels;

  std::size_t rows() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim),
            static_cast<std::size_t>(dim)};
  }
};

enum class Provenance { clean, label_noise, label_flipped };

// One client's shard plus a record of how its labels were produced.
struct ClientDataset {
  Dataset data;
  Provenance provenance = Provenance::clean;
  double noise_prob = 0.0;  // re-assignment probability when provenance == label_noise
};

}  // namespace fedscore
