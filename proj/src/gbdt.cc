#include "flowstab/gbdt.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

namespace flowstab::gbdt {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Uniform index in [0, n) from a 64-bit engine; identical on every platform.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(n));
}

struct Candidate {
  double gain = 0.0;
  int feature = kNoChild;
  double threshold = 0.0;
  bool default_left = true;
  bool found = false;
};

struct Leaf {
  int node = 0;
  int depth = 0;
  std::size_t begin = 0;  // segment in rows_
  std::size_t end = 0;
  std::vector<std::pair<std::size_t, std::size_t>> segments;  // per active feature
  double sum = 0.0;
  double sum_sq = 0.0;
  Candidate best;
};

// Grows one regression tree on residuals. Column-major data and per-feature
// presorted row orders are shared across rounds.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& columns,
              const std::vector<std::vector<std::uint32_t>>& presorted, const HyperParams& params)
      : columns_(columns), presorted_(presorted), params_(params) {}

  // `leaf_of_row` receives the leaf node index of every training row.
  Tree build(const std::vector<double>& residual, const std::vector<int>& features,
             std::vector<int>& leaf_of_row) {
    residual_ = &residual;
    features_ = features;
    const std::size_t n = residual.size();
    rows_.resize(n);
    std::iota(rows_.begin(), rows_.end(), 0u);
    goes_left_.assign(n, 0);
    orders_.resize(features_.size());
    for (std::size_t k = 0; k < features_.size(); ++k) orders_[k] = presorted_[features_[k]];
    buffer_.resize(n);

    Tree tree;
    std::vector<Leaf> leaves(1);
    Leaf& root = leaves[0];
    root.begin = 0;
    root.end = n;
    for (std::size_t k = 0; k < features_.size(); ++k) root.segments.emplace_back(0, orders_[k].size());
    for (std::size_t i = 0; i < n; ++i) {
      root.sum += residual[i];
      root.sum_sq += residual[i] * residual[i];
    }
    tree.nodes.push_back(make_leaf_node(root));
    evaluate(root);

    while (static_cast<int>(leaves.size()) < params_.max_leaves) {
      std::size_t pick = leaves.size();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (!leaves[i].best.found) continue;
        if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain) pick = i;
      }
      if (pick == leaves.size()) break;
      auto [left, right] = split(leaves[pick], tree);
      evaluate(left);
      evaluate(right);
      leaves[pick] = std::move(left);
      leaves.push_back(std::move(right));
    }

    leaf_of_row.assign(n, 0);
    for (const Leaf& leaf : leaves) {
      for (std::size_t i = leaf.begin; i < leaf.end; ++i) leaf_of_row[rows_[i]] = leaf.node;
    }
    return tree;
  }

 private:
  TreeNode make_leaf_node(const Leaf& leaf) const {
    TreeNode node;
    const auto count = static_cast<double>(leaf.end - leaf.begin);
    node.cover = count;
    node.leaf_value = count > 0 ? leaf.sum / count : 0.0;
    return node;
  }

  void evaluate(Leaf& leaf) const {
    leaf.best = Candidate{};
    const std::size_t count = leaf.end - leaf.begin;
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    if (leaf.depth >= params_.max_depth || count < 2 * min_leaf) return;
    const auto& res = *residual_;
    const double parent = leaf.sum * leaf.sum / static_cast<double>(count);
    // Splits gaining less than this are rounding noise.
    const double min_gain = 1e-12 * std::max(leaf.sum_sq, std::numeric_limits<double>::min());

    for (std::size_t k = 0; k < features_.size(); ++k) {
      const auto& column = columns_[features_[k]];
      const auto& order = orders_[k];
      const auto [b, e] = leaf.segments[k];
      if (b == e) continue;
      double nonmissing_sum = 0.0;
      for (std::size_t i = b; i < e; ++i) nonmissing_sum += res[order[i]];
      const std::size_t n_miss = count - (e - b);
      const double s_miss = leaf.sum - nonmissing_sum;

      auto consider = [&](std::size_t n_left, double s_left, double threshold, bool default_left) {
        const std::size_t n_right = count - n_left;
        if (n_left < min_leaf || n_right < min_leaf) return;
        const double s_right = leaf.sum - s_left;
        const double gain = s_left * s_left / static_cast<double>(n_left) +
                            s_right * s_right / static_cast<double>(n_right) - parent;
        if (gain > min_gain && (!leaf.best.found || gain > leaf.best.gain)) {
          leaf.best = {gain, features_[k], threshold, default_left, true};
        }
      };

      double s_left = 0.0;
      std::size_t c_left = 0;
      for (std::size_t i = b; i + 1 < e; ++i) {
        s_left += res[order[i]];
        ++c_left;
        const double lo = column[order[i]];
        const double hi = column[order[i + 1]];
        if (!(lo < hi)) continue;
        double threshold = lo / 2 + hi / 2;
        if (!(threshold < hi) || threshold < lo) threshold = lo;
        if (n_miss == 0) {
          consider(c_left, s_left, threshold, c_left >= count - c_left);
        } else {
          consider(c_left, s_left, threshold, false);
          consider(c_left + n_miss, s_left + s_miss, threshold, true);
        }
      }
      if (n_miss > 0) {
        // Present values left, missing values right.
        consider(e - b, nonmissing_sum, column[order[e - 1]], false);
      }
    }
  }

  std::pair<Leaf, Leaf> split(const Leaf& parent, Tree& tree) {
    const Candidate& c = parent.best;
    const auto& column = columns_[c.feature];
    const auto& res = *residual_;
    for (std::size_t i = parent.begin; i < parent.end; ++i) {
      const std::uint32_t r = rows_[i];
      const double v = column[r];
      goes_left_[r] = std::isnan(v) ? c.default_left : v <= c.threshold;
    }

    Leaf left;
    Leaf right;
    left.depth = right.depth = parent.depth + 1;
    const std::size_t mid = stable_partition(rows_, parent.begin, parent.end);
    left.begin = parent.begin;
    left.end = mid;
    right.begin = mid;
    right.end = parent.end;
    for (std::size_t i = left.begin; i < left.end; ++i) {
      left.sum += res[rows_[i]];
      left.sum_sq += res[rows_[i]] * res[rows_[i]];
    }
    for (std::size_t i = right.begin; i < right.end; ++i) {
      right.sum += res[rows_[i]];
      right.sum_sq += res[rows_[i]] * res[rows_[i]];
    }
    for (std::size_t k = 0; k < features_.size(); ++k) {
      const auto [b, e] = parent.segments[k];
      const std::size_t m = stable_partition(orders_[k], b, e);
      left.segments.emplace_back(b, m);
      right.segments.emplace_back(m, e);
    }

    const int parent_node = parent.node;
    left.node = static_cast<int>(tree.nodes.size());
    right.node = left.node + 1;
    tree.nodes.push_back(make_leaf_node(left));
    tree.nodes.push_back(make_leaf_node(right));
    TreeNode& p = tree.nodes[parent_node];
    p.split_feature = c.feature;
    p.threshold = c.threshold;
    p.default_left = c.default_left;
    p.left = left.node;
    p.right = right.node;
    p.leaf_value = 0.0;
    return {std::move(left), std::move(right)};
  }

  // Stable partition of v[b, e) by goes_left_; returns the split point.
  std::size_t stable_partition(std::vector<std::uint32_t>& v, std::size_t b, std::size_t e) {
    std::size_t out = b;
    std::size_t spill = 0;
    for (std::size_t i = b; i < e; ++i) {
      if (goes_left_[v[i]]) {
        v[out++] = v[i];
      } else {
        buffer_[spill++] = v[i];
      }
    }
    std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(spill),
              v.begin() + static_cast<std::ptrdiff_t>(out));
    return out;
  }

  const std::vector<std::vector<double>>& columns_;
  const std::vector<std::vector<std::uint32_t>>& presorted_;
  const HyperParams& params_;
  const std::vector<double>* residual_ = nullptr;
  std::vector<int> features_;
  std::vector<std::uint32_t> rows_;
  std::vector<std::vector<std::uint32_t>> orders_;
  std::vector<std::uint32_t> buffer_;
  std::vector<std::uint8_t> goes_left_;
};

double mse_of(const std::vector<double>& pred, const std::vector<double>& y) {
  if (y.empty()) return kNaN;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - pred[i];
    sum += d * d;
  }
  return sum / static_cast<double>(y.size());
}

int depth_from(const Tree& tree, int node) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) return 0;
  return 1 + std::max(depth_from(tree, n.left), depth_from(tree, n.right));
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.feature_names = feature_names;
  out.x = Matrix(rows.size(), x.cols);
  out.y.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = x.row(rows[i]);
    std::copy(src.begin(), src.end(), out.x.values.begin() + static_cast<std::ptrdiff_t>(i * x.cols));
    if (!y.empty()) out.y.push_back(y[rows[i]]);
    if (!hours.empty()) out.hours.push_back(hours[rows[i]]);
  }
  return out;
}

int Tree::leaf_index(std::span<const double> row) const {
  int idx = 0;
  while (!nodes[idx].is_leaf()) {
    const TreeNode& n = nodes[idx];
    const double v = row[static_cast<std::size_t>(n.split_feature)];
    const bool left = std::isnan(v) ? n.default_left : v <= n.threshold;
    idx = left ? n.left : n.right;
  }
  return idx;
}

int Tree::depth() const { return nodes.empty() ? 0 : depth_from(*this, 0); }

void TreeEnsemble::validate() const {
  if (!std::isfinite(base_score) || !std::isfinite(learning_rate)) {
    throw ModelFormatError("non-finite base_score or learning_rate");
  }
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& nodes = trees[t].nodes;
    const std::string where = "tree " + std::to_string(t);
    if (nodes.empty()) throw ModelFormatError(where + " has no nodes");
    std::vector<int> parents(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode& n = nodes[i];
      const std::string node = where + " node " + std::to_string(i);
      if (!(n.cover >= 0.0) || !std::isfinite(n.cover)) {
        throw ModelFormatError(node + " has invalid cover");
      }
      if ((n.left == kNoChild) != (n.right == kNoChild)) {
        throw ModelFormatError(node + " has exactly one child");
      }
      if (n.is_leaf()) {
        if (n.split_feature != kNoChild) throw ModelFormatError(node + " is a leaf with a split");
        if (!std::isfinite(n.leaf_value)) throw ModelFormatError(node + " has non-finite value");
        continue;
      }
      if (n.split_feature < 0 || static_cast<std::size_t>(n.split_feature) >= num_features()) {
        throw ModelFormatError(node + " splits on unknown feature");
      }
      if (std::isnan(n.threshold)) throw ModelFormatError(node + " has NaN threshold");
      for (int child : {n.left, n.right}) {
        if (child <= static_cast<int>(i) || child >= static_cast<int>(nodes.size())) {
          throw ModelFormatError(node + " has out-of-order child index");
        }
        if (++parents[static_cast<std::size_t>(child)] > 1) {
          throw ModelFormatError(node + " shares a child with another node");
        }
      }
      if (!(n.cover > 0.0)) throw ModelFormatError(node + " is an internal node with zero cover");
      const double sum = nodes[n.left].cover + nodes[n.right].cover;
      if (std::abs(sum - n.cover) > 1e-9 * std::max(1.0, n.cover)) {
        throw ModelFormatError(node + " cover differs from the sum of its children");
      }
    }
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (parents[i] != 1) throw ModelFormatError(where + " has unreachable nodes");
    }
  }
}

void HyperParams::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (max_leaves < 2) throw std::invalid_argument("max_leaves must be at least 2");
  if (max_depth < 1) throw std::invalid_argument("max_depth must be positive");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be positive");
  if (number_of_rounds < 0) throw std::invalid_argument("number_of_rounds must be >= 0");
  if (early_stopping_patience < 0) throw std::invalid_argument("patience must be >= 0");
  if (!(feature_subsample > 0.0 && feature_subsample <= 1.0)) {
    throw std::invalid_argument("feature_subsample must lie in (0, 1]");
  }
}

Split split_shuffled(std::size_t n, const SplitSpec& spec) {
  if (n < 5) throw std::invalid_argument("need at least 5 rows to split, got " + std::to_string(n));
  const double total = spec.train_fraction + spec.validation_fraction + spec.test_fraction;
  if (std::abs(total - 1.0) > 1e-9 || spec.train_fraction <= 0 || spec.validation_fraction < 0 ||
      spec.test_fraction < 0) {
    throw std::invalid_argument("split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[draw_index(rng, i + 1)]);

  const auto n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * n));
  const std::size_t n_train = n - n_val - n_test;
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                      idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

FitResult fit(const Dataset& train, const Dataset& validation, const HyperParams& params) {
  params.validate();
  const std::size_t n = train.size();
  const std::size_t p = train.x.cols;
  if (train.y.size() != n) throw std::invalid_argument("target length differs from row count");
  if (n == 0 || n < static_cast<std::size_t>(params.min_samples_leaf)) {
    throw std::invalid_argument("training set smaller than min_samples_leaf");
  }
  if (validation.size() > 0 && validation.x.cols != p) {
    throw std::invalid_argument("validation arity differs from training arity");
  }
  for (double v : train.y) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite training target");
  }
  for (double v : validation.y) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite validation target");
  }

  FitResult result;
  TreeEnsemble& model = result.ensemble;
  model.learning_rate = params.learning_rate;
  model.feature_names = train.feature_names;
  if (model.feature_names.size() != p) {
    model.feature_names.clear();
    for (std::size_t j = 0; j < p; ++j) model.feature_names.push_back("f" + std::to_string(j));
  }
  double sum = 0.0;
  for (double v : train.y) sum += v;
  model.base_score = sum / static_cast<double>(n);

  // Column-major copy and per-feature presorted orders.
  std::vector<std::vector<double>> columns(p, std::vector<double>(n));
  std::vector<std::vector<std::uint32_t>> presorted(p);
  std::vector<int> usable;
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) columns[j][i] = train.x.at(i, j);
    auto& order = presorted[j];
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isnan(columns[j][i])) order.push_back(static_cast<std::uint32_t>(i));
    }
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      return columns[j][a] < columns[j][b];
    });
    if (order.empty()) {
      result.history.warnings.push_back("feature '" + model.feature_names[j] +
                                        "' is missing in every training row; ignored");
    } else {
      usable.push_back(static_cast<int>(j));
    }
  }

  std::vector<double> train_pred(n, model.base_score);
  std::vector<double> val_pred(validation.size(), model.base_score);
  std::vector<double> residual(n);
  const bool early_stopping = validation.size() > 0 && params.early_stopping_patience > 0;

  auto& history = result.history;
  history.rounds.push_back({0, mse_of(train_pred, train.y), mse_of(val_pred, validation.y)});
  double best_val = history.rounds.back().validation_mse;
  int best_round = 0;

  TreeBuilder builder(columns, presorted, params);
  std::mt19937_64 rng(params.seed);
  std::vector<int> leaf_of_row;
  for (int round = 1; round <= params.number_of_rounds && !usable.empty(); ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = train.y[i] - train_pred[i];

    std::vector<int> features = usable;
    if (params.feature_subsample < 1.0) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(params.feature_subsample * usable.size())));
      for (std::size_t i = 0; i < keep; ++i) {
        std::swap(features[i], features[i + draw_index(rng, features.size() - i)]);
      }
      features.resize(keep);
      std::sort(features.begin(), features.end());
    }

    Tree tree = builder.build(residual, features, leaf_of_row);
    if (tree.nodes.size() == 1) {
      // No split clears the gain threshold; further rounds would only add
      // rounding noise to the constant residual mean.
      history.warnings.push_back("stopped at round " + std::to_string(round) +
                                 ": no informative split left");
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      train_pred[i] += params.learning_rate * tree.nodes[leaf_of_row[i]].leaf_value;
    }
    for (std::size_t i = 0; i < validation.size(); ++i) {
      val_pred[i] += params.learning_rate * tree.predict(validation.x.row(i));
    }
    model.trees.push_back(std::move(tree));
    history.rounds.push_back({round, mse_of(train_pred, train.y), mse_of(val_pred, validation.y)});

    if (early_stopping) {
      const double v = history.rounds.back().validation_mse;
      if (v < best_val) {
        best_val = v;
        best_round = round;
      } else if (round - best_round >= params.early_stopping_patience) {
        break;
      }
    } else {
      best_round = round;
    }
  }

  model.trees.resize(static_cast<std::size_t>(best_round));
  history.best_round = best_round;
  return result;
}

double predict_row(const TreeEnsemble& ensemble, std::span<const double> row) {
  double out = ensemble.base_score;
  for (const Tree& tree : ensemble.trees) out += ensemble.learning_rate * tree.predict(row);
  return out;
}

std::vector<double> predict(const TreeEnsemble& ensemble, const Matrix& rows) {
  if (rows.rows > 0 && rows.cols != ensemble.num_features()) {
    throw std::invalid_argument("row arity " + std::to_string(rows.cols) +
                                " differs from model arity " +
                                std::to_string(ensemble.num_features()));
  }
  std::vector<double> out(rows.rows);
  for (std::size_t i = 0; i < rows.rows; ++i) out[i] = predict_row(ensemble, rows.row(i));
  return out;
}

double mean_squared_error(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || targets.empty()) {
    throw std::invalid_argument("mean_squared_error needs equal, non-empty inputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - predictions[i];
    sum += d * d;
  }
  return sum / static_cast<double>(targets.size());
}

std::optional<double> r2_score(std::span<const double> predictions,
                               std::span<const double> targets) {
  if (predictions.size() != targets.size() || targets.empty()) {
    throw std::invalid_argument("r2_score needs equal, non-empty inputs");
  }
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(targets.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

GridSearchResult grid_search_cv(const Dataset& train, const Dataset& validation,
                                const std::vector<HyperParams>& grid, int folds, int jobs) {
  if (grid.empty()) throw std::invalid_argument("empty hyperparameter grid");
  if (folds < 2) throw std::invalid_argument("need at least 2 folds");
  const std::size_t n = train.size();
  if (n < static_cast<std::size_t>(folds)) {
    throw std::invalid_argument("fewer training rows than folds");
  }
  for (const auto& p : grid) p.validate();

  const auto k = static_cast<std::size_t>(folds);
  std::vector<Dataset> fold_train(k);
  std::vector<Dataset> fold_test(k);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t b = f * n / k;
    const std::size_t e = (f + 1) * n / k;
    std::vector<std::size_t> in;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i) (i >= b && i < e ? out : in).push_back(i);
    fold_train[f] = train.subset(in);
    fold_test[f] = train.subset(out);
  }

  GridSearchResult result;
  result.table.resize(grid.size());
  const std::size_t tasks = grid.size() * k;
  std::vector<double> scores(tasks, kNaN);
  auto run = [&](std::size_t task) {
    const std::size_t g = task / k;
    const std::size_t f = task % k;
    const FitResult fr = fit(fold_train[f], validation, grid[g]);
    scores[task] = mean_squared_error(predict(fr.ensemble, fold_test[f].x), fold_test[f].y);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < tasks; t += workers) run(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t g = 0; g < grid.size(); ++g) {
    CvEntry& entry = result.table[g];
    entry.params = grid[g];
    double sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      entry.fold_mse.push_back(scores[g * k + f]);
      sum += scores[g * k + f];
    }
    entry.mean_mse = sum / static_cast<double>(k);
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const CvEntry& a = result.table[g];
    const CvEntry& b = result.table[best];
    const bool better =
        a.mean_mse < b.mean_mse ||
        (a.mean_mse == b.mean_mse &&
         (a.params.max_leaves < b.params.max_leaves ||
          (a.params.max_leaves == b.params.max_leaves &&
           a.params.learning_rate < b.params.learning_rate)));
    if (better) best = g;
  }
  result.best_index = best;
  result.best = grid[best];
  return result;
}

std::vector<HyperParams> expand_grid(const HyperParams& base,
                                     const std::vector<double>& learning_rates,
                                     const std::vector<int>& max_leaves,
                                     const std::vector<int>& min_samples_leaf) {
  std::vector<HyperParams> grid;
  for (double lr : learning_rates) {
    for (int leaves : max_leaves) {
      for (int msl : min_samples_leaf) {
        HyperParams p = base;
        p.learning_rate = lr;
        p.max_leaves = leaves;
        p.min_samples_leaf = msl;
        grid.push_back(p);
      }
    }
  }
  return grid;
}

std::vector<HyperParams> default_grid(const HyperParams& base) {
  return expand_grid(base, {0.05, 0.1}, {15, 31, 63}, {20, 100});
}

DailyProfilePredictor DailyProfilePredictor::fit(std::span<const double> targets,
                                                 std::span<const int> hours) {
  if (targets.size() != hours.size() || targets.empty()) {
    throw std::invalid_argument("daily profile needs equal, non-empty inputs");
  }
  DailyProfilePredictor p;
  std::vector<double> sums(24, 0.0);
  std::vector<std::size_t> counts(24, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int h = hours[i];
    if (h < 0 || h > 23) throw std::invalid_argument("hour of day out of range");
    sums[static_cast<std::size_t>(h)] += targets[i];
    ++counts[static_cast<std::size_t>(h)];
    total += targets[i];
  }
  p.fallback_ = total / static_cast<double>(targets.size());
  for (std::size_t h = 0; h < 24; ++h) {
    p.has_data_[h] = counts[h] > 0;
    p.bucket_means_[h] = counts[h] > 0 ? sums[h] / static_cast<double>(counts[h]) : p.fallback_;
  }
  return p;
}

double DailyProfilePredictor::predict(int hour_of_day) const {
  if (hour_of_day < 0 || hour_of_day > 23) throw std::invalid_argument("hour of day out of range");
  return bucket_means_[static_cast<std::size_t>(hour_of_day)];
}

std::vector<double> DailyProfilePredictor::predict(std::span<const int> hours) const {
  std::vector<double> out;
  out.reserve(hours.size());
  for (int h : hours) out.push_back(predict(h));
  return out;
}

nlohmann::json to_json(const TreeEnsemble& ensemble) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : ensemble.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : tree.nodes) {
      nodes.push_back({{"split_feature", n.split_feature},
                       {"threshold", n.threshold},
                       {"default_left", n.default_left},
                       {"left", n.left},
                       {"right", n.right},
                       {"leaf_value", n.leaf_value},
                       {"cover", n.cover}});
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"format", "flowstab.gbdt"},
          {"version", 1},
          {"base_score", ensemble.base_score},
          {"learning_rate", ensemble.learning_rate},
          {"feature_names", ensemble.feature_names},
          {"trees", std::move(trees)}};
}

TreeEnsemble ensemble_from_json(const nlohmann::json& doc) {
  TreeEnsemble e;
  try {
    if (doc.at("format").get<std::string>() != "flowstab.gbdt") {
      throw ModelFormatError("unknown model format");
    }
    e.base_score = doc.at("base_score").get<double>();
    e.learning_rate = doc.at("learning_rate").get<double>();
    e.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    for (const auto& t : doc.at("trees")) {
      Tree tree;
      for (const auto& n : t.at("nodes")) {
        TreeNode node;
        node.split_feature = n.at("split_feature").get<int>();
        node.threshold = n.at("threshold").get<double>();
        node.default_left = n.at("default_left").get<bool>();
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.leaf_value = n.at("leaf_value").get<double>();
        if (!n.contains("cover")) throw ModelFormatError("node without cover");
        node.cover = n.at("cover").get<double>();
        tree.nodes.push_back(node);
      }
      e.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ModelFormatError(std::string("malformed model JSON: ") + ex.what());
  }
  e.validate();
  return e;
}

nlohmann::json to_json(const HyperParams& p) {
  return {{"learning_rate", p.learning_rate},
          {"max_leaves", p.max_leaves},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf},
          {"number_of_rounds", p.number_of_rounds},
          {"early_stopping_patience", p.early_stopping_patience},
          {"feature_subsample", p.feature_subsample},
          {"seed", p.seed}};
}

HyperParams hyperparams_from_json(const nlohmann::json& doc, const HyperParams& defaults) {
  HyperParams p = defaults;
  p.learning_rate = doc.value("learning_rate", p.learning_rate);
  p.max_leaves = doc.value("max_leaves", p.max_leaves);
  p.max_depth = doc.value("max_depth", p.max_depth);
  p.min_samples_leaf = doc.value("min_samples_leaf", p.min_samples_leaf);
  p.number_of_rounds = doc.value("number_of_rounds", p.number_of_rounds);
  p.early_stopping_patience = doc.value("early_stopping_patience", p.early_stopping_patience);
  p.feature_subsample = doc.value("feature_subsample", p.feature_subsample);
  p.seed = doc.value("seed", p.seed);
  return p;
}

nlohmann::json to_json(const TrainingHistory& history) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : history.rounds) {
    rounds.push_back({{"round", r.round},
                      {"train_mse", r.train_mse},
                      {"validation_mse", std::isnan(r.validation_mse)
                                             ? nlohmann::json(nullptr)
                                             : nlohmann::json(r.validation_mse)}});
  }
  return {{"rounds", std::move(rounds)},
          {"best_round", history.best_round},
          {"warnings", history.warnings}};
}

nlohmann::json to_json(const GridSearchResult& result) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : result.table) {
    table.push_back({{"params", to_json(e.params)}, {"fold_mse", e.fold_mse}, {"mean_mse", e.mean_mse}});
  }
  return {{"best_index", result.best_index}, {"best", to_json(result.best)}, {"table", table}};
}

}  // namespace flowstab::gbdt
