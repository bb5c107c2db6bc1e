#include "fedscore/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedscore {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const Dataset& d) {
  std::vector<std::vector<std::size_t>> by_class(d.classes);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const int y = d.labels[i];
    if (y < 0 || y >= d.classes) {
      throw std::invalid_argument("data: label out of range");
    }
    by_class[y].push_back(i);
  }
  return by_class;
}

Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.dim = d.dim;
  out.classes = d.classes;
  out.features.reserve(rows.size() * static_cast<std::size_t>(d.dim));
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto x = d.row(r);
    out.features.insert(out.features.end(), x.begin(), x.end());
    out.labels.push_back(d.labels[r]);
  }
  return out;
}

// Largest-remainder apportionment of `total` samples across shares.
std::vector<std::size_t> apportion(const std::vector<double>& shares, std::size_t total) {
  const std::size_t k = shares.size();
  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double quota = shares[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    assigned += counts[i];
    remainders[i] = {quota - std::floor(quota), i};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::size_t leftover = total - assigned;
  for (std::size_t i = 0; i < leftover && i < k; ++i) {
    ++counts[remainders[i].second];
  }
  return counts;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, Rng& rng) {
  if (spec.dim < 1 || spec.classes < 2) {
    throw std::invalid_argument("synthetic: dim must be >= 1 and classes >= 2");
  }
  if (spec.samples < static_cast<std::size_t>(spec.classes)) {
    throw std::invalid_argument("synthetic: need at least one sample per class");
  }
  if (!(spec.separation >= 0.0)) {
    throw std::invalid_argument("synthetic: separation must be >= 0");
  }
  Dataset d;
  d.dim = spec.dim;
  d.classes = spec.classes;
  d.features.reserve(spec.samples * static_cast<std::size_t>(spec.dim));
  d.labels.reserve(spec.samples);
  const std::size_t base = spec.samples / static_cast<std::size_t>(spec.classes);
  const std::size_t extra = spec.samples % static_cast<std::size_t>(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    const std::size_t count = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
    const int axis = c % spec.dim;
    for (std::size_t s = 0; s < count; ++s) {
      for (int j = 0; j < spec.dim; ++j) {
        const double mean = j == axis ? spec.separation : 0.0;
        d.features.push_back(mean + rng.normal());
      }
      d.labels.push_back(c);
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& full, double fraction, Rng& rng) {
  if (!(fraction >= 0.0) || fraction >= 1.0) {
    throw std::invalid_argument("split_holdout: fraction must be in [0, 1)");
  }
  auto by_class = indices_by_class(full);
  std::vector<bool> held(full.rows(), false);
  for (auto& idx : by_class) {
    if (idx.empty()) {
      continue;
    }
    rng.shuffle(idx);
    const double quota = fraction * static_cast<double>(idx.size());
    std::size_t take = static_cast<std::size_t>(std::llround(quota));
    take = std::min(take, idx.size() - 1);
    for (std::size_t i = 0; i < take; ++i) {
      held[idx[i]] = true;
    }
  }
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> holdout_rows;
  for (std::size_t i = 0; i < full.rows(); ++i) {
    (held[i] ? holdout_rows : train_rows).push_back(i);
  }
  return {take_rows(full, train_rows), take_rows(full, holdout_rows)};
}

std::vector<ClientDataset> iid_partition(const Dataset& full, int clients, Rng& rng) {
  if (clients < 2) {
    throw std::invalid_argument("partition: need at least two clients");
  }
  if (full.rows() < static_cast<std::size_t>(clients)) {
    throw std::invalid_argument("partition: fewer samples than clients");
  }
  const auto perm = rng.permutation(full.rows());
  const std::size_t k = static_cast<std::size_t>(clients);
  const std::size_t base = full.rows() / k;
  const std::size_t extra = full.rows() % k;
  std::vector<ClientDataset> out(k);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t count = base + (i < extra ? 1 : 0);
    std::vector<std::size_t> rows(perm.begin() + cursor, perm.begin() + cursor + count);
    cursor += count;
    out[i].data = take_rows(full, rows);
  }
  return out;
}

std::vector<ClientDataset> dirichlet_partition(const Dataset& full, int clients, double alpha,
                                               Rng& rng) {
  if (clients < 2) {
    throw std::invalid_argument("partition: need at least two clients");
  }
  if (full.rows() < static_cast<std::size_t>(clients)) {
    throw std::invalid_argument("partition: fewer samples than clients");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("partition: alpha must be positive");
  }
  const auto by_class = indices_by_class(full);
  for (const auto& idx : by_class) {
    if (idx.empty()) {
      throw std::invalid_argument("partition: every class needs at least one sample");
    }
  }

  const std::size_t k = static_cast<std::size_t>(clients);
  std::vector<std::vector<std::size_t>> counts;  // [class][client]
  for (int attempt = 0; attempt < 100; ++attempt) {
    counts.clear();
    for (const auto& idx : by_class) {
      counts.push_back(apportion(rng.dirichlet(alpha, k), idx.size()));
    }
    std::vector<std::size_t> totals(k, 0);
    for (const auto& row : counts) {
      for (std::size_t i = 0; i < k; ++i) {
        totals[i] += row[i];
      }
    }
    if (*std::min_element(totals.begin(), totals.end()) > 0) {
      break;
    }
  }

  // Last resort: move single samples from the largest client until nobody is
  // empty. Deterministic tie-breaks keep this reproducible.
  for (;;) {
    std::vector<std::size_t> totals(k, 0);
    for (const auto& row : counts) {
      for (std::size_t i = 0; i < k; ++i) {
        totals[i] += row[i];
      }
    }
    const auto empty_it = std::find(totals.begin(), totals.end(), std::size_t{0});
    if (empty_it == totals.end()) {
      break;
    }
    const std::size_t recipient = static_cast<std::size_t>(empty_it - totals.begin());
    const std::size_t donor = static_cast<std::size_t>(
        std::max_element(totals.begin(), totals.end()) - totals.begin());
    std::size_t best_class = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
      if (counts[c][donor] > counts[best_class][donor]) {
        best_class = c;
      }
    }
    --counts[best_class][donor];
    ++counts[best_class][recipient];
  }

  std::vector<ClientDataset> out(k);
  std::vector<std::vector<std::size_t>> rows_per_client(k);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t s = 0; s < counts[c][i]; ++s) {
        rows_per_client[i].push_back(by_class[c][cursor++]);
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    out[i].data = take_rows(full, rows_per_client[i]);
  }
  return out;
}

std::vector<ClientDataset> inject_linear_label_noise(std::vector<ClientDataset> clients,
                                                     Rng& rng) {
  if (clients.size() < 2) {
    throw std::invalid_argument("label_noise: need at least two clients");
  }
  const double denom = static_cast<double>(clients.size() - 1);
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const double p = static_cast<double>(k) / denom;
    Rng stream = rng.fork("label_noise", k);
    Dataset& d = clients[k].data;
    for (auto& label : d.labels) {
      if (stream.uniform() < p) {
        label = static_cast<int>(stream.uniform_int(static_cast<std::uint64_t>(d.classes)));
      }
    }
    clients[k].provenance = Provenance::label_noise;
    clients[k].noise_prob = p;
  }
  return clients;
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv_records(const std::string& text) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool record_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (table.header.empty()) {
      table.header = std::move(record);
    } else {
      table.rows.push_back(std::move(record));
    }
    record.clear();
    record_started = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        record_started = true;
        break;
      case ',':
        end_field();
        record_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (record_started || field_started || !field.empty() || !record.empty()) {
          end_record();
        }
        break;
      default:
        field.push_back(c);
        field_started = true;
        record_started = true;
        break;
    }
  }
  if (in_quotes) {
    throw std::invalid_argument("csv: unterminated quoted field");
  }
  if (record_started || !record.empty() || !field.empty()) {
    end_record();
  }
  return table;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) {
    return false;
  }
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

}  // namespace

Dataset parse_csv(const std::string& text, const std::string& label_column,
                  Normalization normalization) {
  CsvTable table = parse_csv_records(text);
  if (table.header.empty()) {
    throw std::invalid_argument("csv: missing header row");
  }
  if (table.rows.empty()) {
    throw std::invalid_argument("csv: no data rows");
  }
  const std::size_t width = table.header.size();
  std::size_t label_idx = width;
  for (std::size_t j = 0; j < width; ++j) {
    if (table.header[j] == label_column) {
      label_idx = j;
      break;
    }
  }
  if (label_idx == width) {
    throw std::invalid_argument("csv: unknown label column '" + label_column + "'");
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != width) {
      throw std::invalid_argument("csv: row " + std::to_string(r + 1) + " has " +
                                  std::to_string(table.rows[r].size()) + " fields, expected " +
                                  std::to_string(width));
    }
  }

  // Column types come from the first data row.
  std::vector<bool> numeric(width, false);
  for (std::size_t j = 0; j < width; ++j) {
    double x;
    numeric[j] = parse_number(table.rows[0][j], x);
  }

  // Label mapping: numeric labels sort numerically, everything else
  // lexicographically.
  std::vector<int> labels(table.rows.size());
  int classes = 0;
  if (numeric[label_idx]) {
    std::map<double, int> ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      double x;
      if (!parse_number(table.rows[r][label_idx], x)) {
        throw std::invalid_argument("csv: row " + std::to_string(r + 1) +
                                    ": cannot parse label '" + table.rows[r][label_idx] +
                                    "' as a number");
      }
      ids.emplace(x, 0);
    }
    for (auto& [value, id] : ids) {
      id = classes++;
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      double x;
      parse_number(table.rows[r][label_idx], x);
      labels[r] = ids[x];
    }
  } else {
    std::map<std::string, int> ids;
    for (const auto& row : table.rows) {
      ids.emplace(row[label_idx], 0);
    }
    for (auto& [value, id] : ids) {
      id = classes++;
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      labels[r] = ids[table.rows[r][label_idx]];
    }
  }
  if (classes < 2) {
    throw std::invalid_argument("csv: need at least two distinct label values");
  }

  // Feature layout: header order, one slot per numeric column, one slot per
  // distinct value of a categorical column.
  struct Column {
    std::size_t src;
    bool numeric;
    std::vector<double> values;          // numeric
    std::map<std::string, int> categories;  // categorical, value -> slot
  };
  std::vector<Column> columns;
  for (std::size_t j = 0; j < width; ++j) {
    if (j == label_idx) {
      continue;
    }
    Column col;
    col.src = j;
    col.numeric = numeric[j];
    if (col.numeric) {
      col.values.resize(table.rows.size());
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (!parse_number(table.rows[r][j], col.values[r])) {
          throw std::invalid_argument("csv: row " + std::to_string(r + 1) + ", column '" +
                                      table.header[j] + "': cannot parse '" + table.rows[r][j] +
                                      "' as a number");
        }
      }
      if (normalization == Normalization::zscore) {
        const double n = static_cast<double>(col.values.size());
        const double mean = std::accumulate(col.values.begin(), col.values.end(), 0.0) / n;
        double var = 0.0;
        for (double v : col.values) {
          var += (v - mean) * (v - mean);
        }
        const double sd = std::sqrt(var / n);
        for (double& v : col.values) {
          v = sd > 0.0 ? (v - mean) / sd : 0.0;
        }
      }
    } else {
      for (const auto& row : table.rows) {
        col.categories.emplace(row[j], 0);
      }
      int slot = 0;
      for (auto& [value, s] : col.categories) {
        s = slot++;
      }
    }
    columns.push_back(std::move(col));
  }

  std::size_t dim = 0;
  for (const auto& col : columns) {
    dim += col.numeric ? 1 : col.categories.size();
  }
  if (dim == 0) {
    throw std::invalid_argument("csv: no feature columns");
  }

  Dataset d;
  d.dim = static_cast<int>(dim);
  d.classes = classes;
  d.labels = std::move(labels);
  d.features.assign(table.rows.size() * dim, 0.0);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    double* out = d.features.data() + r * dim;
    std::size_t slot = 0;
    for (const auto& col : columns) {
      if (col.numeric) {
        out[slot++] = col.values[r];
      } else {
        out[slot + col.categories.at(table.rows[r][col.src])] = 1.0;
        slot += col.categories.size();
      }
    }
  }
  return d;
}

Dataset load_csv(const std::string& path, const std::string& label_column,
                 Normalization normalization) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("csv: cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), label_column, normalization);
}

}  // namespace fedscore
