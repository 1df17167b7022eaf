#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowstab/time.h"
#include "json.hpp"

namespace flowstab::gbdt {

// Raised when a serialized or hand-built ensemble violates the node format.
class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major feature matrix. NaN marks a missing value.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }
};

struct Dataset {
  Matrix x;
  std::vector<double> y;
  std::vector<std::string> feature_names;
  std::vector<Timestamp> hours;  // optional; used by the daily-profile baseline

  std::size_t size() const { return x.rows; }
  Dataset subset(std::span<const std::size_t> rows) const;
};

inline constexpr int kNoChild = -1;

struct TreeNode {
  int split_feature = kNoChild;  // kNoChild for leaves
  double threshold = 0.0;        // x <= threshold goes left
  bool default_left = true;      // route for missing values
  int left = kNoChild;
  int right = kNoChild;
  double leaf_value = 0.0;       // unscaled; multiplied by the learning rate
  double cover = 0.0;            // training rows reaching this node

  bool is_leaf() const { return left == kNoChild; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // Index of the leaf reached by `row`.
  int leaf_index(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return nodes[leaf_index(row)].leaf_value; }
  int depth() const;
};

struct TreeEnsemble {
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::vector<Tree> trees;
  std::vector<std::string> feature_names;

  std::size_t num_features() const { return feature_names.size(); }

  // Throws ModelFormatError on broken structure: bad child indices, leaf
  // and split fields mixed, split features out of range, non-finite
  // values, non-positive internal covers, or covers that do not add up.
  void validate() const;
};

struct HyperParams {
  double learning_rate = 0.1;
  int max_leaves = 31;
  int max_depth = 12;
  int min_samples_leaf = 20;
  int number_of_rounds = 1000;      // upper bound
  int early_stopping_patience = 20; // 0 disables early stopping
  double feature_subsample = 1.0;   // per-tree column fraction in (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitSpec {
  double train_fraction = 0.64;
  double validation_fraction = 0.16;
  double test_fraction = 0.20;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Shuffles row indices 0..n-1 and cuts them into disjoint sets. Validation
// and test sizes are rounded to the nearest integer; train takes the rest.
// Throws std::invalid_argument for fewer than 5 rows.
Split split_shuffled(std::size_t n, const SplitSpec& spec);

struct RoundLoss {
  int round = 0;  // 0 = base score only
  double train_mse = 0.0;
  double validation_mse = 0.0;  // NaN without a validation set
};

struct TrainingHistory {
  std::vector<RoundLoss> rounds;
  int best_round = 0;  // number of trees kept
  std::vector<std::string> warnings;
};

struct FitResult {
  TreeEnsemble ensemble;
  TrainingHistory history;
};

// Squared-loss boosting with exact greedy, leaf-wise tree growth. Each
// round fits a tree to the current residuals with leaf value = mean residual
// and adds it scaled by the learning rate. Stops once the validation loss
// has not improved for `early_stopping_patience` rounds and truncates the
// ensemble at the best validation round. An empty validation set disables
// early stopping.
FitResult fit(const Dataset& train, const Dataset& validation, const HyperParams& params);

double predict_row(const TreeEnsemble& ensemble, std::span<const double> row);
std::vector<double> predict(const TreeEnsemble& ensemble, const Matrix& rows);

double mean_squared_error(std::span<const double> predictions, std::span<const double> targets);

// 1 - SS_res / SS_tot; nullopt for constant targets.
std::optional<double> r2_score(std::span<const double> predictions,
                               std::span<const double> targets);

struct CvEntry {
  HyperParams params;
  std::vector<double> fold_mse;
  double mean_mse = 0.0;
};

struct GridSearchResult {
  HyperParams best;
  std::size_t best_index = 0;
  std::vector<CvEntry> table;
};

// Mean held-out MSE over `folds` contiguous folds of `train`; each fold fit
// early-stops on `validation`. Ties go to smaller max_leaves, then smaller
// learning_rate, then grid order. `jobs` > 1 evaluates fits on worker
// threads without changing the result.
GridSearchResult grid_search_cv(const Dataset& train, const Dataset& validation,
                                const std::vector<HyperParams>& grid, int folds = 5,
                                int jobs = 1);

// learning_rate x max_leaves x min_samples_leaf on top of `base`.
std::vector<HyperParams> expand_grid(const HyperParams& base,
                                     const std::vector<double>& learning_rates,
                                     const std::vector<int>& max_leaves,
                                     const std::vector<int>& min_samples_leaf);
std::vector<HyperParams> default_grid(const HyperParams& base = {});

// Predicts the training mean of each hour-of-day bucket. Buckets without
// training data fall back to the overall training mean.
class DailyProfilePredictor {
 public:
  static DailyProfilePredictor fit(std::span<const double> targets, std::span<const int> hours);
  double predict(int hour_of_day) const;
  std::vector<double> predict(std::span<const int> hours) const;

 private:
  std::vector<double> bucket_means_ = std::vector<double>(24, 0.0);
  std::vector<bool> has_data_ = std::vector<bool>(24, false);
  double fallback_ = 0.0;
};

nlohmann::json to_json(const TreeEnsemble& ensemble);
// Validates the result; throws ModelFormatError.
TreeEnsemble ensemble_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const HyperParams& params);
HyperParams hyperparams_from_json(const nlohmann::json& doc, const HyperParams& defaults = {});
nlohmann::json to_json(const TrainingHistory& history);
nlohmann::json to_json(const GridSearchResult& result);

}  // namespace flowstab::gbdt
