#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hybridcert/confidence.hpp"
#include "hybridcert/kernels.hpp"
#include "hybridcert/numerics.hpp"

namespace hybridcert::harness {

// PAD token id for absorbing smoothing; lives outside every vocabulary.
inline constexpr int kPadToken = -1;

// One mixed-feature example: token ids for the categorical part and
// standardized reals for the continuous part.
struct HybridInput {
  std::vector<int> tokens;
  std::vector<double> features;
};

// Deterministic base classifier: identical inputs must yield identical
// outputs, otherwise the smoothed score is not well defined.
struct BaseClassifier {
  std::string name;
  std::function<int(const HybridInput&)> predict;
};

enum class DatasetSource { kSyntheticLinear, kCsvFile };

struct ColumnStats {
  double mean = 0.0;
  double scale = 1.0;
};

struct DatasetSpec {
  DatasetSource source = DatasetSource::kSyntheticLinear;
  std::vector<std::string> categorical_columns;
  std::vector<std::string> continuous_columns;
  std::string label_column;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<HybridInput> rows;
  std::vector<int> labels;  // {0, 1}
  // Per categorical column: token id -> original string. The last entry is
  // the reserved UNK token for categories unseen at ingestion time.
  std::vector<std::vector<std::string>> vocabularies;
  std::vector<int> vocab_sizes;          // per categorical column, incl. UNK
  std::vector<ColumnStats> standardization;  // per continuous column
  std::vector<std::string> label_names;
  int rows_dropped_missing = 0;
};

// Smoothing applied by the sampler: per-position kernel draws on eligible
// token positions, isotropic Gaussian on every continuous coordinate.
struct SmoothingConfig {
  KernelKind kind = KernelKind::kUniform;
  double beta = 0.25;
  double sigma = 1.0;
  std::vector<int> vocab_sizes;  // per token position
};

// Deterministic seed derivation: any worker layout that assigns sample i the
// seed derive_seed(master, i) reproduces the sequential result.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b = 0);

// Suffix-append accounting on the padded representation: appended tokens are
// replacements of trailing PAD slots, so the eligible positions are
// [clean_length, padded_length). The append budget is capped by the padding
// headroom.
std::vector<int> suffix_eligible_positions(int clean_length,
                                           int padded_length);

// Draws one product-kernel sample. Eligible positions are independently
// corrupted with probability beta (uniform over the position's V-1 other
// tokens, or to PAD for absorbing); every continuous coordinate gets
// N(0, sigma^2) noise.
HybridInput sample_product_kernel(const HybridInput& input,
                                  const SmoothingConfig& smoothing,
                                  const std::vector<int>& eligible_positions,
                                  std::uint64_t seed);

// Fixed-vocabulary overload matching a single text-style kernel.
HybridInput sample_product_kernel(const HybridInput& input,
                                  const KernelParams& kernel, double sigma,
                                  const std::vector<int>& eligible_positions,
                                  std::uint64_t seed);

struct SmoothedScore {
  MonteCarloEstimate estimate;
  UnitProbability lower_bound;
};

// Monte Carlo estimate of P[classifier(noisy input) = 1] with a one-sided
// Clopper-Pearson lower bound. Reproducible per seed; sample order never
// affects the counts.
SmoothedScore smoothed_score(const BaseClassifier& classifier,
                             const HybridInput& input,
                             const SmoothingConfig& smoothing,
                             const std::vector<int>& eligible_positions,
                             std::int64_t n_samples,
                             UnitProbability risk_alpha, std::uint64_t seed);

struct SweepRow {
  int budget_d = 0;
  double epsilon = 0.0;
  double certified_fraction = 0.0;
  int n_examples = 0;
  double sigma = 0.0;
  double beta = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

// Certified-accuracy sweep over (d, epsilon): per example, estimate the
// smoothed score of the true label, then certify each discrete budget by
// taking the minimum certified radius over all column subsets of size <= d
// (per-column cardinalities differ, so the worst attacked subset is found by
// exact enumeration of the <= C(#cat, d) product channels).
SweepTable certified_accuracy_sweep(const Dataset& dataset,
                                    const BaseClassifier& classifier,
                                    KernelKind kernel_kind, double beta,
                                    double sigma, UnitProbability tau,
                                    const std::vector<int>& d_values,
                                    const std::vector<double>& epsilon_grid,
                                    std::int64_t n_samples,
                                    UnitProbability risk_alpha,
                                    std::uint64_t seed);

// CSV ingestion: header required, comma separated, '?' cells drop the row
// (counted in rows_dropped_missing). Categorical values map to token ids in
// first-seen order with a reserved trailing UNK; continuous columns are
// standardized and the (mean, scale) pairs persisted so radii are reported in
// standardized units.
Dataset ingest_csv(const std::string& path, const DatasetSpec& spec);

// Writes the dataset back out in original units; ingest(export(ds)) is the
// identity up to float formatting.
void export_csv(const Dataset& dataset, const std::string& path);

// Linear model over (one-hot tokens ++ continuous features). Its
// Gaussian-smoothed score at beta = 0 has the closed form
// Phi(margin / (sigma * ||w_cont||)), which makes it an estimator oracle.
struct LinearModel {
  std::vector<std::vector<double>> token_weights;  // per column, per token
  std::vector<double> feature_weights;
  double bias = 0.0;

  double margin(const HybridInput& input) const;
  BaseClassifier classifier() const;
  double feature_weight_norm() const;
};

struct SyntheticDataset {
  Dataset dataset;
  LinearModel model;
};

// Deterministic synthetic mixed-feature dataset; labels come from the model
// itself so the base classifier is consistent with them.
SyntheticDataset make_synthetic_linear(int n_examples,
                                       const std::vector<int>& vocab_sizes,
                                       int n_continuous, std::uint64_t seed);

// Nearest-class-mean fit in the joint one-hot/continuous embedding: the
// trivial linear classifier used for CSV demos.
LinearModel fit_centroid_linear(const Dataset& dataset);

}  // namespace hybridcert::harness
