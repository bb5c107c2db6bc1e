#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fedscore/dataset.hpp"
#include "fedscore/rng.hpp"

namespace fedscore {

struct SyntheticSpec {
  std::size_t samples = 500;
  int dim = 8;
  int classes = 3;
  double separation = 3.0;  // distance scale between class means
};

// Gaussian class clusters with unit covariance. Class c is centered at
// separation along axis (c mod dim); class sizes are as equal as possible,
// with the first (samples mod classes) classes one larger.
Dataset generate_synthetic(const SyntheticSpec& spec, Rng& rng);

// Stratified holdout: from each class, a `fraction` share (rounded, always
// leaving at least one training sample per class) moves to the second
// dataset. Returns {train, holdout}.
std::pair<Dataset, Dataset> split_holdout(const Dataset& full, double fraction, Rng& rng);

// Equal-size random split: a uniformly shuffled order cut into contiguous
// chunks, the first (rows mod clients) chunks one sample larger.
std::vector<ClientDataset> iid_partition(const Dataset& full, int clients, Rng& rng);

// Class-wise Dirichlet(alpha) split: for every class, client shares are drawn
// from a symmetric Dirichlet and converted to counts by largest remainder.
// Draws are retried up to 100 times if some client ends up empty; after that
// single samples are moved from the largest client until every client has
// at least one.
std::vector<ClientDataset> dirichlet_partition(const Dataset& full, int clients, double alpha,
                                               Rng& rng);

// Re-assigns labels uniformly over all classes with per-client probability
// p_k = k / (clients - 1) for 0-based k, so the first client keeps its labels
// and the last client's labels carry no signal.
std::vector<ClientDataset> inject_linear_label_noise(std::vector<ClientDataset> clients, Rng& rng);

enum class Normalization { none, zscore };

// Loads an RFC 4180 CSV with a header row. Column types are inferred from the
// first data row: a cell that fully parses as a number makes the column
// numeric, anything else categorical. Numeric columns become one feature each
// (z-scored with the population standard deviation when requested, constant
// columns become zeros); categorical columns are one-hot encoded over their
// sorted distinct values. Labels are mapped to class ids by sorted distinct
// value. Malformed rows are reported by 1-based data row index.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 Normalization normalization);

// Same, but parses CSV text directly (used by tests).
Dataset parse_csv(const std::string& text, const std::string& label_column,
                  Normalization normalization);

}  // namespace fedscore
