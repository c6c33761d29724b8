#include "hybridcert/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "hybridcert/certificate.hpp"

namespace hybridcert::harness {
namespace {

struct SampleStream {
  std::mt19937_64 gen;
  explicit SampleStream(std::uint64_t seed) : gen(seed) {}
  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }
  int uniform_int(int n) {  // [0, n)
    return std::min(n - 1, static_cast<int>(uniform() * n));
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // Trim surrounding whitespace.
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string()
                                           : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

// Subsets of {0..n-1} with size exactly k, in lexicographic order.
void enumerate_subsets(int n, int k, std::vector<std::vector<int>>* out) {
  std::vector<int> pick(k);
  const std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      out->push_back(pick);
      return;
    }
    for (int i = start; i < n; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  if (k == 0) {
    out->push_back({});
    return;
  }
  rec(0, 0);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (a + 1) +
                    0xD1B54A32D192ED03ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<int> suffix_eligible_positions(int clean_length,
                                           int padded_length) {
  if (clean_length < 0 || padded_length < clean_length) {
    throw ParameterError(
        "suffix_eligible_positions: need 0 <= clean_length <= padded_length");
  }
  std::vector<int> positions;
  positions.reserve(padded_length - clean_length);
  for (int pos = clean_length; pos < padded_length; ++pos) {
    positions.push_back(pos);
  }
  return positions;
}

HybridInput sample_product_kernel(const HybridInput& input,
                                  const SmoothingConfig& smoothing,
                                  const std::vector<int>& eligible_positions,
                                  std::uint64_t seed) {
  if (smoothing.vocab_sizes.size() != input.tokens.size()) {
    throw ParameterError(
        "sample_product_kernel: vocab_sizes must match token positions");
  }
  for (int pos : eligible_positions) {
    if (pos < 0 || pos >= static_cast<int>(input.tokens.size())) {
      throw ParameterError("sample_product_kernel: eligible position out of "
                           "range");
    }
  }
  SampleStream stream(seed);
  HybridInput noisy = input;
  for (int pos : eligible_positions) {
    if (stream.uniform() >= smoothing.beta) continue;
    if (smoothing.kind == KernelKind::kAbsorbing) {
      noisy.tokens[pos] = kPadToken;
      continue;
    }
    const int v = smoothing.vocab_sizes[pos];
    if (v < 2) {
      throw ParameterError("sample_product_kernel: vocab size must be >= 2");
    }
    // Uniform over the V-1 tokens other than the current one.
    int alt = stream.uniform_int(v - 1);
    if (alt >= noisy.tokens[pos]) ++alt;
    noisy.tokens[pos] = alt;
  }
  for (double& x : noisy.features) {
    x += smoothing.sigma * stream.normal();
  }
  return noisy;
}

HybridInput sample_product_kernel(const HybridInput& input,
                                  const KernelParams& kernel, double sigma,
                                  const std::vector<int>& eligible_positions,
                                  std::uint64_t seed) {
  SmoothingConfig smoothing;
  smoothing.kind = kernel.kind;
  smoothing.beta = kernel.corruption_rate_beta.value();
  smoothing.sigma = sigma;
  smoothing.vocab_sizes.assign(input.tokens.size(), kernel.vocab_size);
  return sample_product_kernel(input, smoothing, eligible_positions, seed);
}

SmoothedScore smoothed_score(const BaseClassifier& classifier,
                             const HybridInput& input,
                             const SmoothingConfig& smoothing,
                             const std::vector<int>& eligible_positions,
                             std::int64_t n_samples,
                             UnitProbability risk_alpha, std::uint64_t seed) {
  if (n_samples < 1) {
    throw ParameterError("smoothed_score: n_samples must be >= 1");
  }
  std::int64_t successes = 0;
  for (std::int64_t i = 0; i < n_samples; ++i) {
    const HybridInput noisy = sample_product_kernel(
        input, smoothing, eligible_positions,
        derive_seed(seed, static_cast<std::uint64_t>(i)));
    int label = 0;
    try {
      label = classifier.predict(noisy);
    } catch (const std::exception& e) {
      throw NumericError("smoothed_score: classifier '" + classifier.name +
                         "' failed at sample " + std::to_string(i) + ": " +
                         e.what());
    }
    if (label == 1) ++successes;
  }
  SmoothedScore score;
  score.estimate = MonteCarloEstimate{n_samples, successes, risk_alpha};
  score.lower_bound = clopper_pearson_lower(score.estimate);
  return score;
}

SweepTable certified_accuracy_sweep(const Dataset& dataset,
                                    const BaseClassifier& classifier,
                                    KernelKind kernel_kind, double beta,
                                    double sigma, UnitProbability tau,
                                    const std::vector<int>& d_values,
                                    const std::vector<double>& epsilon_grid,
                                    std::int64_t n_samples,
                                    UnitProbability risk_alpha,
                                    std::uint64_t seed) {
  if (dataset.rows.empty()) {
    throw ParameterError("certified_accuracy_sweep: empty dataset");
  }
  if (d_values.empty() || epsilon_grid.empty()) {
    throw ParameterError("certified_accuracy_sweep: grids must be nonempty");
  }
  const int n_cat = static_cast<int>(dataset.vocab_sizes.size());
  for (int d : d_values) {
    if (d < 0 || d > n_cat) {
      throw ParameterError(
          "certified_accuracy_sweep: budget exceeds categorical columns");
    }
  }

  SmoothingConfig smoothing{kernel_kind, beta, sigma, dataset.vocab_sizes};
  std::vector<int> all_positions(n_cat);
  for (int i = 0; i < n_cat; ++i) all_positions[i] = i;

  // Single-column channels; product over an attacked subset gives that
  // subset's grouped representation.
  std::vector<GroupedLikelihoodRatio> column_channel;
  column_channel.reserve(n_cat);
  for (int c = 0; c < n_cat; ++c) {
    column_channel.push_back(
        kernel_kind == KernelKind::kUniform
            ? build_uniform_groups(1, UnitProbability(beta),
                                   dataset.vocab_sizes[c])
            : build_absorbing_groups(1, UnitProbability(beta)));
  }

  const int max_d = *std::max_element(d_values.begin(), d_values.end());
  std::vector<std::vector<std::vector<int>>> subsets_by_size(max_d + 1);
  for (int k = 0; k <= max_d; ++k) {
    enumerate_subsets(n_cat, k, &subsets_by_size[k]);
  }

  const int n_examples = static_cast<int>(dataset.rows.size());
  // certified radius per example per budget; negative = not certified.
  std::vector<std::vector<double>> radius(n_examples,
                                          std::vector<double>(max_d + 1));
  for (int e = 0; e < n_examples; ++e) {
    const int truth = dataset.labels[e];
    BaseClassifier truth_indicator{
        classifier.name,
        [&classifier, truth](const HybridInput& z) {
          return classifier.predict(z) == truth ? 1 : 0;
        }};
    const SmoothedScore score = smoothed_score(
        truth_indicator, dataset.rows[e], smoothing, all_positions, n_samples,
        risk_alpha, derive_seed(seed, static_cast<std::uint64_t>(e)));
    const UnitProbability p_hat = score.lower_bound;

    // min over subsets of size <= d, so budgets nest by construction.
    double worst = std::numeric_limits<double>::infinity();
    for (int d = 0; d <= max_d; ++d) {
      for (const auto& subset : subsets_by_size[d]) {
        GroupedLikelihoodRatio groups{{{1.0, 1.0}}};
        for (int col : subset) {
          groups = product_channel(groups, column_channel[col]);
        }
        const CertificateResult cert = certified_radius(
            p_hat, sigma, groups, tau, kDefaultRadiusTolerance,
            kDefaultThresholdTolerance, default_r_max(sigma), d);
        const double r = cert.certified ? cert.certified_radius : -1.0;
        worst = std::min(worst, r);
      }
      radius[e][d] = worst;
    }
  }

  SweepTable table;
  for (int d : d_values) {
    for (double eps : epsilon_grid) {
      int certified = 0;
      for (int e = 0; e < n_examples; ++e) {
        if (radius[e][d] >= 0.0 && radius[e][d] >= eps) ++certified;
      }
      SweepRow row;
      row.budget_d = d;
      row.epsilon = eps;
      row.certified_fraction =
          static_cast<double>(certified) / static_cast<double>(n_examples);
      row.n_examples = n_examples;
      row.sigma = sigma;
      row.beta = beta;
      row.tau = tau.value();
      row.seed = seed;
      table.rows.push_back(row);
    }
  }
  return table;
}

Dataset ingest_csv(const std::string& path, const DatasetSpec& spec) {
  std::ifstream file(path);
  if (!file) {
    throw ParameterError("ingest_csv: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(file, line)) {
    throw ParameterError("ingest_csv: '" + path + "' is empty");
  }
  const std::vector<std::string> header = split_csv_line(line);
  const auto column_index = [&header, &path](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParameterError("ingest_csv: column '" + name + "' missing in '" +
                           path + "'");
    }
    return static_cast<int>(it - header.begin());
  };

  std::vector<int> cat_idx;
  std::vector<int> cont_idx;
  for (const auto& name : spec.categorical_columns) {
    cat_idx.push_back(column_index(name));
  }
  for (const auto& name : spec.continuous_columns) {
    cont_idx.push_back(column_index(name));
  }
  const int label_idx = column_index(spec.label_column);

  Dataset ds;
  ds.spec = spec;
  ds.spec.source = DatasetSource::kCsvFile;
  ds.vocabularies.resize(cat_idx.size());
  std::vector<std::vector<double>> raw_features(cont_idx.size());
  std::vector<std::vector<int>> raw_tokens;
  std::vector<std::string> raw_labels;

  int line_no = 1;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParameterError("ingest_csv: line " + std::to_string(line_no) +
                           " has " + std::to_string(cells.size()) +
                           " cells, expected " +
                           std::to_string(header.size()));
    }
    bool missing = false;
    for (int idx : cat_idx) {
      if (cells[idx] == "?") missing = true;
    }
    for (int idx : cont_idx) {
      if (cells[idx] == "?") missing = true;
    }
    if (cells[label_idx] == "?") missing = true;
    if (missing) {
      ++ds.rows_dropped_missing;
      continue;
    }

    std::vector<int> tokens;
    for (std::size_t c = 0; c < cat_idx.size(); ++c) {
      const std::string& value = cells[cat_idx[c]];
      auto& vocab = ds.vocabularies[c];
      const auto it = std::find(vocab.begin(), vocab.end(), value);
      if (it == vocab.end()) {
        vocab.push_back(value);
        tokens.push_back(static_cast<int>(vocab.size()) - 1);
      } else {
        tokens.push_back(static_cast<int>(it - vocab.begin()));
      }
    }
    raw_tokens.push_back(std::move(tokens));
    for (std::size_t c = 0; c < cont_idx.size(); ++c) {
      const std::string& cell = cells[cont_idx[c]];
      try {
        std::size_t used = 0;
        const double value = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        raw_features[c].push_back(value);
      } catch (const std::exception&) {
        throw ParameterError("ingest_csv: non-numeric value '" + cell +
                             "' at line " + std::to_string(line_no) +
                             ", column '" + spec.continuous_columns[c] + "'");
      }
    }
    raw_labels.push_back(cells[label_idx]);
  }
  if (raw_tokens.empty()) {
    throw ParameterError("ingest_csv: no usable rows in '" + path + "'");
  }

  // Reserve the UNK slot so inference-time unseen categories have a home.
  for (auto& vocab : ds.vocabularies) {
    vocab.push_back("<UNK>");
    ds.vocab_sizes.push_back(static_cast<int>(vocab.size()));
  }

  const int n_rows = static_cast<int>(raw_tokens.size());
  ds.standardization.resize(cont_idx.size());
  for (std::size_t c = 0; c < cont_idx.size(); ++c) {
    double mean = 0.0;
    for (double x : raw_features[c]) mean += x;
    mean /= n_rows;
    double var = 0.0;
    for (double x : raw_features[c]) var += (x - mean) * (x - mean);
    var /= n_rows;
    const double scale = var > 0.0 ? std::sqrt(var) : 1.0;
    ds.standardization[c] = ColumnStats{mean, scale};
  }

  for (const auto& label : raw_labels) {
    if (std::find(ds.label_names.begin(), ds.label_names.end(), label) ==
        ds.label_names.end()) {
      ds.label_names.push_back(label);
    }
  }
  if (ds.label_names.size() > 2) {
    throw ParameterError("ingest_csv: label column '" + spec.label_column +
                         "' has more than two classes");
  }
  // Literal 0/1 labels keep their face value regardless of row order.
  if (ds.label_names.size() == 2 && ds.label_names[0] == "1" &&
      ds.label_names[1] == "0") {
    std::swap(ds.label_names[0], ds.label_names[1]);
  }

  for (int r = 0; r < n_rows; ++r) {
    HybridInput input;
    input.tokens = raw_tokens[r];
    for (std::size_t c = 0; c < cont_idx.size(); ++c) {
      const auto& stats = ds.standardization[c];
      input.features.push_back((raw_features[c][r] - stats.mean) /
                               stats.scale);
    }
    ds.rows.push_back(std::move(input));
    const auto it = std::find(ds.label_names.begin(), ds.label_names.end(),
                              raw_labels[r]);
    ds.labels.push_back(static_cast<int>(it - ds.label_names.begin()));
  }
  return ds;
}

void export_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream file(path);
  if (!file) {
    throw ParameterError("export_csv: cannot open '" + path + "' for write");
  }
  file.precision(17);
  for (std::size_t c = 0; c < dataset.spec.categorical_columns.size(); ++c) {
    file << dataset.spec.categorical_columns[c] << ",";
  }
  for (std::size_t c = 0; c < dataset.spec.continuous_columns.size(); ++c) {
    file << dataset.spec.continuous_columns[c] << ",";
  }
  file << dataset.spec.label_column << "\n";
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    const HybridInput& row = dataset.rows[r];
    for (std::size_t c = 0; c < row.tokens.size(); ++c) {
      file << dataset.vocabularies[c][row.tokens[c]] << ",";
    }
    for (std::size_t c = 0; c < row.features.size(); ++c) {
      const auto& stats = dataset.standardization[c];
      file << row.features[c] * stats.scale + stats.mean << ",";
    }
    file << dataset.label_names[dataset.labels[r]] << "\n";
  }
}

double LinearModel::margin(const HybridInput& input) const {
  double m = bias;
  for (std::size_t c = 0; c < token_weights.size(); ++c) {
    const int token = input.tokens[c];
    // PAD and UNK-out-of-range tokens contribute nothing.
    if (token >= 0 && token < static_cast<int>(token_weights[c].size())) {
      m += token_weights[c][token];
    }
  }
  for (std::size_t c = 0; c < feature_weights.size(); ++c) {
    m += feature_weights[c] * input.features[c];
  }
  return m;
}

BaseClassifier LinearModel::classifier() const {
  return BaseClassifier{"synthetic_linear", [model = *this](
                                                const HybridInput& input) {
                          return model.margin(input) > 0.0 ? 1 : 0;
                        }};
}

double LinearModel::feature_weight_norm() const {
  double s = 0.0;
  for (double w : feature_weights) s += w * w;
  return std::sqrt(s);
}

SyntheticDataset make_synthetic_linear(int n_examples,
                                       const std::vector<int>& vocab_sizes,
                                       int n_continuous, std::uint64_t seed) {
  if (n_examples < 1 || vocab_sizes.empty() || n_continuous < 1) {
    throw ParameterError("make_synthetic_linear: invalid dimensions");
  }
  for (int v : vocab_sizes) {
    if (v < 2) {
      throw ParameterError("make_synthetic_linear: cardinalities must be >= 2");
    }
  }
  SampleStream stream(derive_seed(seed, 0xDA7A));

  LinearModel model;
  for (int v : vocab_sizes) {
    std::vector<double> weights(v);
    for (double& w : weights) w = 1.2 * (stream.uniform() - 0.5);
    model.token_weights.push_back(std::move(weights));
  }
  model.feature_weights.resize(n_continuous);
  for (double& w : model.feature_weights) w = 2.0 * (stream.uniform() - 0.5);
  model.bias = 0.4 * (stream.uniform() - 0.5);

  SyntheticDataset out;
  out.model = model;
  Dataset& ds = out.dataset;
  ds.spec.source = DatasetSource::kSyntheticLinear;
  for (std::size_t c = 0; c < vocab_sizes.size(); ++c) {
    ds.spec.categorical_columns.push_back("cat" + std::to_string(c));
    std::vector<std::string> vocab;
    for (int t = 0; t < vocab_sizes[c]; ++t) {
      vocab.push_back("c" + std::to_string(c) + "v" + std::to_string(t));
    }
    ds.vocabularies.push_back(std::move(vocab));
    ds.vocab_sizes.push_back(vocab_sizes[c]);
  }
  for (int c = 0; c < n_continuous; ++c) {
    ds.spec.continuous_columns.push_back("num" + std::to_string(c));
    ds.standardization.push_back(ColumnStats{0.0, 1.0});
  }
  ds.spec.label_column = "label";
  ds.label_names = {"0", "1"};

  const BaseClassifier clf = model.classifier();
  for (int e = 0; e < n_examples; ++e) {
    HybridInput input;
    for (int v : vocab_sizes) {
      input.tokens.push_back(stream.uniform_int(v));
    }
    for (int c = 0; c < n_continuous; ++c) {
      input.features.push_back(stream.normal());
    }
    ds.labels.push_back(clf.predict(input));
    ds.rows.push_back(std::move(input));
  }
  return out;
}

LinearModel fit_centroid_linear(const Dataset& dataset) {
  if (dataset.rows.empty()) {
    throw ParameterError("fit_centroid_linear: empty dataset");
  }
  const std::size_t n_cat = dataset.vocab_sizes.size();
  const std::size_t n_cont = dataset.rows.front().features.size();

  // Class means in the one-hot ++ continuous embedding.
  std::vector<std::vector<std::vector<double>>> token_mean(
      2, std::vector<std::vector<double>>(n_cat));
  std::vector<std::vector<double>> feature_mean(
      2, std::vector<double>(n_cont, 0.0));
  for (int y = 0; y < 2; ++y) {
    for (std::size_t c = 0; c < n_cat; ++c) {
      token_mean[y][c].assign(dataset.vocab_sizes[c], 0.0);
    }
  }
  std::vector<int> counts(2, 0);
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    const int y = dataset.labels[r];
    ++counts[y];
    const HybridInput& row = dataset.rows[r];
    for (std::size_t c = 0; c < n_cat; ++c) {
      token_mean[y][c][row.tokens[c]] += 1.0;
    }
    for (std::size_t c = 0; c < n_cont; ++c) {
      feature_mean[y][c] += row.features[c];
    }
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw ParameterError("fit_centroid_linear: need both classes present");
  }
  double norm0 = 0.0;
  double norm1 = 0.0;
  LinearModel model;
  for (std::size_t c = 0; c < n_cat; ++c) {
    std::vector<double> w(dataset.vocab_sizes[c], 0.0);
    for (int t = 0; t < dataset.vocab_sizes[c]; ++t) {
      const double m0 = token_mean[0][c][t] / counts[0];
      const double m1 = token_mean[1][c][t] / counts[1];
      w[t] = m1 - m0;
      norm0 += m0 * m0;
      norm1 += m1 * m1;
    }
    model.token_weights.push_back(std::move(w));
  }
  model.feature_weights.resize(n_cont);
  for (std::size_t c = 0; c < n_cont; ++c) {
    const double m0 = feature_mean[0][c] / counts[0];
    const double m1 = feature_mean[1][c] / counts[1];
    model.feature_weights[c] = m1 - m0;
    norm0 += m0 * m0;
    norm1 += m1 * m1;
  }
  model.bias = -0.5 * (norm1 - norm0);
  return model;
}

}  // namespace hybridcert::harness
