#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"

#include "fedscore/data.hpp"

using namespace fedscore;

namespace {

std::vector<std::size_t> class_counts(const Dataset& d) {
  std::vector<std::size_t> counts(d.classes, 0);
  for (int y : d.labels) {
    ++counts[y];
  }
  return counts;
}

std::size_t total_rows(const std::vector<ClientDataset>& clients) {
  std::size_t n = 0;
  for (const auto& c : clients) {
    n += c.data.rows();
  }
  return n;
}

}  // namespace

TEST_CASE("synthetic data has balanced classes around separated means") {
  Rng rng(17);
  SyntheticSpec spec;
  spec.samples = 901;
  spec.dim = 4;
  spec.classes = 3;
  spec.separation = 3.0;
  const Dataset d = generate_synthetic(spec, rng);
  REQUIRE(d.rows() == 901);
  REQUIRE(d.dim == 4);
  const auto counts = class_counts(d);
  CHECK(counts == std::vector<std::size_t>{301, 300, 300});

  for (int c = 0; c < 3; ++c) {
    std::vector<double> mean(4, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      if (d.labels[i] != c) {
        continue;
      }
      const auto row = d.row(i);
      for (int j = 0; j < 4; ++j) {
        mean[j] += row[j];
      }
      ++n;
    }
    for (int j = 0; j < 4; ++j) {
      mean[j] /= static_cast<double>(n);
      const double expected = j == (c % 4) ? 3.0 : 0.0;
      // Unit-variance noise, ~300 per class: 5 sigma is ~0.29.
      CHECK(std::fabs(mean[j] - expected) < 0.3);
    }
  }
}

TEST_CASE("synthetic generation is deterministic in the seed") {
  SyntheticSpec spec;
  Rng a(5);
  Rng b(5);
  const Dataset da = generate_synthetic(spec, a);
  const Dataset db = generate_synthetic(spec, b);
  CHECK(da.features == db.features);
  CHECK(da.labels == db.labels);
}

TEST_CASE("holdout split is stratified and order preserving") {
  Rng rng(19);
  SyntheticSpec spec;
  spec.samples = 200;
  spec.classes = 4;
  const Dataset d = generate_synthetic(spec, rng);
  const auto [train, holdout] = split_holdout(d, 0.2, rng);
  CHECK(train.rows() + holdout.rows() == 200);
  const auto train_counts = class_counts(train);
  const auto hold_counts = class_counts(holdout);
  for (int c = 0; c < 4; ++c) {
    CHECK(hold_counts[c] == 10);  // 0.2 of 50 per class
    CHECK(train_counts[c] == 40);
  }
  // Order preservation: labels of train must be a subsequence of the full set.
  std::size_t pos = 0;
  for (std::size_t i = 0; i < d.rows() && pos < train.rows(); ++i) {
    if (d.labels[i] == train.labels[pos] &&
        std::equal(d.row(i).begin(), d.row(i).end(), train.row(pos).begin())) {
      ++pos;
    }
  }
  CHECK(pos == train.rows());
}

TEST_CASE("holdout always leaves a training sample per class") {
  Dataset d;
  d.dim = 1;
  d.classes = 2;
  d.features = {0.0, 1.0, 2.0};
  d.labels = {0, 0, 1};
  Rng rng(1);
  const auto [train, holdout] = split_holdout(d, 0.9, rng);
  const auto counts = class_counts(train);
  CHECK(counts[0] >= 1);
  CHECK(counts[1] >= 1);
}

TEST_CASE("iid partition covers the dataset with near-equal chunks") {
  Rng rng(23);
  SyntheticSpec spec;
  spec.samples = 103;
  const Dataset d = generate_synthetic(spec, rng);
  const auto clients = iid_partition(d, 5, rng);
  REQUIRE(clients.size() == 5);
  CHECK(total_rows(clients) == 103);
  std::vector<std::size_t> sizes;
  for (const auto& c : clients) {
    sizes.push_back(c.data.rows());
    CHECK(c.provenance == Provenance::clean);
  }
  CHECK(sizes == std::vector<std::size_t>{21, 21, 21, 20, 20});
}

TEST_CASE("dirichlet partition keeps every client nonempty and covers all rows") {
  Rng rng(29);
  SyntheticSpec spec;
  spec.samples = 300;
  const Dataset d = generate_synthetic(spec, rng);
  for (double alpha : {0.05, 0.1, 1.0, 100.0}) {
    Rng local = rng.fork("alpha", static_cast<std::uint64_t>(alpha * 100));
    const auto clients = dirichlet_partition(d, 5, alpha, local);
    REQUIRE(clients.size() == 5);
    CHECK(total_rows(clients) == 300);
    for (const auto& c : clients) {
      CHECK(c.data.rows() >= 1);
    }
  }
}

TEST_CASE("large alpha approaches an even split") {
  Rng rng(31);
  SyntheticSpec spec;
  spec.samples = 500;
  const Dataset d = generate_synthetic(spec, rng);
  const auto clients = dirichlet_partition(d, 5, 1e6, rng);
  for (const auto& c : clients) {
    CHECK(c.data.rows() > 80);
    CHECK(c.data.rows() < 120);
  }
}

TEST_CASE("small alpha concentrates data") {
  Rng rng(37);
  SyntheticSpec spec;
  spec.samples = 500;
  const Dataset d = generate_synthetic(spec, rng);
  const auto clients = dirichlet_partition(d, 5, 0.05, rng);
  std::size_t largest = 0;
  for (const auto& c : clients) {
    largest = std::max(largest, c.data.rows());
  }
  CHECK(largest > 150);
}

TEST_CASE("linear label noise spares the first client and scrambles the last") {
  Rng rng(41);
  SyntheticSpec spec;
  spec.samples = 600;
  spec.classes = 3;
  const Dataset d = generate_synthetic(spec, rng);
  auto clients = iid_partition(d, 4, rng);
  const auto original = clients;
  clients = inject_linear_label_noise(std::move(clients), rng);

  CHECK(clients[0].data.labels == original[0].data.labels);
  CHECK(clients[0].noise_prob == doctest::Approx(0.0));
  CHECK(clients[3].noise_prob == doctest::Approx(1.0));
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(clients[k].provenance == Provenance::label_noise);
    CHECK(clients[k].data.features == original[k].data.features);
  }
  // Client 3 redraws every label uniformly: about 1/3 survive by chance.
  std::size_t changed = 0;
  for (std::size_t i = 0; i < clients[3].data.rows(); ++i) {
    changed += clients[3].data.labels[i] != original[3].data.labels[i];
  }
  const double frac = static_cast<double>(changed) / clients[3].data.rows();
  CHECK(frac > 0.5);
  CHECK(frac < 0.8);
}

TEST_CASE("csv parsing infers types and encodes categories") {
  const std::string text =
      "age,city,income,label\n"
      "30,paris,1000,yes\n"
      "40,rome,2000,no\n"
      "50,paris,3000,yes\n";
  const Dataset d = parse_csv(text, "label", Normalization::none);
  REQUIRE(d.rows() == 3);
  REQUIRE(d.classes == 2);
  // Columns: age (numeric), city one-hot over {paris, rome}, income (numeric).
  REQUIRE(d.dim == 4);
  // Sorted distinct labels: no = 0, yes = 1.
  CHECK(d.labels == std::vector<int>{1, 0, 1});
  const auto r0 = d.row(0);
  CHECK(r0[0] == doctest::Approx(30.0));
  CHECK(r0[1] == doctest::Approx(1.0));  // paris
  CHECK(r0[2] == doctest::Approx(0.0));  // rome
  CHECK(r0[3] == doctest::Approx(1000.0));
  const auto r1 = d.row(1);
  CHECK(r1[1] == doctest::Approx(0.0));
  CHECK(r1[2] == doctest::Approx(1.0));
}

TEST_CASE("z-score normalization centers and scales numeric columns") {
  const std::string text =
      "x,label\n"
      "1,a\n"
      "2,b\n"
      "3,a\n";
  const Dataset d = parse_csv(text, "label", Normalization::zscore);
  const double sd = std::sqrt(2.0 / 3.0);  // population sd of {1,2,3}
  CHECK(d.row(0)[0] == doctest::Approx(-1.0 / sd));
  CHECK(d.row(1)[0] == doctest::Approx(0.0));
  CHECK(d.row(2)[0] == doctest::Approx(1.0 / sd));
}

TEST_CASE("constant numeric columns become zeros under z-score") {
  const std::string text = "x,y,label\n5,1,a\n5,2,b\n";
  const Dataset d = parse_csv(text, "label", Normalization::zscore);
  CHECK(d.row(0)[0] == 0.0);
  CHECK(d.row(1)[0] == 0.0);
}

TEST_CASE("quoted fields and CRLF endings parse per RFC 4180") {
  const std::string text =
      "name,label\r\n"
      "\"smith, john\",yes\r\n"
      "\"line\nbreak\",no\r\n"
      "\"quote\"\"d\",yes\r\n";
  const Dataset d = parse_csv(text, "label", Normalization::none);
  REQUIRE(d.rows() == 3);
  CHECK(d.dim == 3);  // three distinct one-hot names
  CHECK(d.classes == 2);
}

TEST_CASE("numeric labels sort numerically") {
  const std::string text = "x,label\n1,10\n2,9\n3,10\n";
  const Dataset d = parse_csv(text, "label", Normalization::none);
  // Classes sorted numerically: 9 -> 0, 10 -> 1.
  CHECK(d.labels == std::vector<int>{1, 0, 1});
}

TEST_CASE("csv errors cite the offending row and column") {
  CHECK_THROWS_WITH_AS(parse_csv("x,label\n1,a\noops,b\n", "label", Normalization::none),
                       doctest::Contains("row 2"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_csv("x,label\n1,a\noops,b\n", "label", Normalization::none),
                       doctest::Contains("'x'"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_csv("x,label\n1\n", "label", Normalization::none),
                       doctest::Contains("row 1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_csv("x,label\n1,a\n", "missing", Normalization::none),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_csv("x,label\n", "label", Normalization::none), std::invalid_argument);
  CHECK_THROWS_AS(parse_csv("x,label\n1,only\n2,only\n", "label", Normalization::none),
                  std::invalid_argument);
}
