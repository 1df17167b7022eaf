#include "flowstab/treeshap.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "flowstab/csv.h"

namespace flowstab::treeshap {
namespace {

using gbdt::ModelFormatError;
using gbdt::Tree;
using gbdt::TreeEnsemble;
using gbdt::TreeNode;

// One element of the decision path: the feature split on, the fraction of
// "feature absent" weight (zero_fraction) and "feature present" weight
// (one_fraction) flowing through, and the permutation weight.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double denom = depth + 1;
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight += one_fraction * path[i].weight * (i + 1) / denom;
    path[i].weight = zero_fraction * path[i].weight * (depth - i) / denom;
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].weight;
  const double denom = depth + 1;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next_one_portion * denom / ((i + 1) * one_fraction);
      next_one_portion = tmp - path[i].weight * zero_fraction * (depth - i) / denom;
    } else {
      path[i].weight = path[i].weight * denom / (zero_fraction * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total permutation weight if the element at `index` were unwound.
double unwound_path_sum(const PathElement* path, int depth, int index) {
  const double one_fraction = path[index].one_fraction;
  const double zero_fraction = path[index].zero_fraction;
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  const double denom = depth + 1;
  for (int i = depth - 1; i >= 0; --i) {
    if (one_fraction != 0.0) {
      const double tmp = next_one_portion * denom / ((i + 1) * one_fraction);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero_fraction * ((depth - i) / denom);
    } else if (zero_fraction != 0.0) {
      total += (path[i].weight / zero_fraction) / ((depth - i) / denom);
    }
  }
  return total;
}

struct TreeWalker {
  const Tree& tree;
  std::span<const double> row;
  double scale;
  std::vector<double>& phi;

  void recurse(int node_index, int depth, PathElement* parent_path, double parent_zero,
               double parent_one, int parent_feature) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
    PathElement* path = parent_path + depth + 1;
    std::copy(parent_path, parent_path + depth + 1, path);
    extend_path(path, depth, parent_zero, parent_one, parent_feature);

    if (node.is_leaf()) {
      const double value = scale * node.leaf_value;
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const PathElement& el = path[i];
        phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * value;
      }
      return;
    }

    if (!(node.cover > 0.0)) {
      throw ModelFormatError("internal node " + std::to_string(node_index) + " has zero cover");
    }
    const double x = row[static_cast<std::size_t>(node.split_feature)];
    const bool go_left = std::isnan(x) ? node.default_left : x <= node.threshold;
    const int hot = go_left ? node.left : node.right;
    const int cold = go_left ? node.right : node.left;
    const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
    const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / node.cover;

    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int path_index = 0;
    for (; path_index <= depth; ++path_index) {
      if (path[path_index].feature == node.split_feature) break;
    }
    if (path_index != depth + 1) {
      incoming_zero = path[path_index].zero_fraction;
      incoming_one = path[path_index].one_fraction;
      unwind_path(path, depth, path_index);
      depth -= 1;
    }

    // A branch that carries no weight of either kind contributes nothing.
    if (hot_zero * incoming_zero != 0.0 || incoming_one != 0.0) {
      recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one, node.split_feature);
    }
    if (cold_zero * incoming_zero != 0.0) {
      recurse(cold, depth + 1, path, cold_zero * incoming_zero, 0.0, node.split_feature);
    }
  }
};

double expected_tree_value(const Tree& tree, int node_index) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return node.leaf_value;
  if (!(node.cover > 0.0)) {
    throw ModelFormatError("internal node " + std::to_string(node_index) + " has zero cover");
  }
  const double wl = tree.nodes[static_cast<std::size_t>(node.left)].cover / node.cover;
  const double wr = tree.nodes[static_cast<std::size_t>(node.right)].cover / node.cover;
  return wl * expected_tree_value(tree, node.left) + wr * expected_tree_value(tree, node.right);
}

void check_arity(const TreeEnsemble& ensemble, std::size_t n) {
  if (n != ensemble.num_features()) {
    throw std::invalid_argument("row has " + std::to_string(n) + " features, model expects " +
                                std::to_string(ensemble.num_features()));
  }
}

// Cover-weighted value of one tree when only features in `present` are
// known; absent features average over both children.
double conditional_value(const Tree& tree, int node_index, std::span<const double> row,
                         std::uint32_t present) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.is_leaf()) return node.leaf_value;
  if (present & (1u << node.split_feature)) {
    const double x = row[static_cast<std::size_t>(node.split_feature)];
    const bool go_left = std::isnan(x) ? node.default_left : x <= node.threshold;
    return conditional_value(tree, go_left ? node.left : node.right, row, present);
  }
  if (!(node.cover > 0.0)) {
    throw ModelFormatError("internal node " + std::to_string(node_index) + " has zero cover");
  }
  const double cl = tree.nodes[static_cast<std::size_t>(node.left)].cover;
  const double cr = tree.nodes[static_cast<std::size_t>(node.right)].cover;
  return (cl * conditional_value(tree, node.left, row, present) +
          cr * conditional_value(tree, node.right, row, present)) /
         node.cover;
}

}  // namespace

double expected_value(const TreeEnsemble& ensemble) {
  double sum = 0.0;
  for (const Tree& tree : ensemble.trees) sum += expected_tree_value(tree, 0);
  return ensemble.base_score + ensemble.learning_rate * sum;
}

ShapResult shap_exact(const TreeEnsemble& ensemble, std::span<const double> row) {
  check_arity(ensemble, row.size());
  ShapResult result;
  result.phi.assign(ensemble.num_features(), 0.0);
  result.base_value = ensemble.base_score;
  std::vector<PathElement> path_storage;
  for (const Tree& tree : ensemble.trees) {
    result.base_value += ensemble.learning_rate * expected_tree_value(tree, 0);
    const int max_depth = tree.depth() + 2;
    path_storage.assign(static_cast<std::size_t>(max_depth * (max_depth + 1) / 2), {});
    TreeWalker walker{tree, row, ensemble.learning_rate, result.phi};
    walker.recurse(0, 0, path_storage.data(), 1.0, 1.0, -1);
  }
  result.prediction = gbdt::predict_row(ensemble, row);
  return result;
}

ShapResult shap_bruteforce(const TreeEnsemble& ensemble, std::span<const double> row) {
  check_arity(ensemble, row.size());
  const std::size_t n = ensemble.num_features();
  if (n > kMaxBruteForceFeatures) {
    throw std::invalid_argument("brute-force SHAP supports at most 20 features");
  }
  const std::uint32_t subsets = 1u << n;
  std::vector<double> value(subsets, 0.0);
  for (std::uint32_t s = 0; s < subsets; ++s) {
    double v = 0.0;
    for (const Tree& tree : ensemble.trees) v += conditional_value(tree, 0, row, s);
    value[s] = ensemble.base_score + ensemble.learning_rate * v;
  }
  // weight(|S|) = |S|! (n - |S| - 1)! / n!
  std::vector<double> weight(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(s + 1.0) + std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(n + 1.0));
  }
  ShapResult result;
  result.phi.assign(n, 0.0);
  result.base_value = value[0];
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint32_t bit = 1u << j;
    double phi = 0.0;
    for (std::uint32_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
    result.phi[j] = phi;
  }
  result.prediction = gbdt::predict_row(ensemble, row);
  return result;
}

std::vector<double> ShapMatrix::column(std::size_t feature) const {
  std::vector<double> out(phi.rows);
  for (std::size_t i = 0; i < phi.rows; ++i) out[i] = phi.at(i, feature);
  return out;
}

ShapResult ShapMatrix::row(std::size_t i) const {
  const auto r = phi.row(i);
  return {base_values.at(i), std::vector<double>(r.begin(), r.end()), predictions.at(i)};
}

ShapMatrix shap_batch(const TreeEnsemble& ensemble, const gbdt::Matrix& rows, int jobs) {
  ensemble.validate();
  ShapMatrix out;
  out.feature_names = ensemble.feature_names;
  out.phi = gbdt::Matrix(rows.rows, ensemble.num_features());
  out.base_values.assign(rows.rows, 0.0);
  out.predictions.assign(rows.rows, 0.0);
  if (rows.rows == 0) return out;
  check_arity(ensemble, rows.cols);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ShapResult r = shap_exact(ensemble, rows.row(i));
      std::copy(r.phi.begin(), r.phi.end(),
                out.phi.values.begin() + static_cast<std::ptrdiff_t>(i * out.phi.cols));
      out.base_values[i] = r.base_value;
      out.predictions[i] = r.prediction;
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, jobs)), rows.rows);
  if (workers == 1) {
    work(0, rows.rows);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        work(w * rows.rows / workers, (w + 1) * rows.rows / workers);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string format_shap_csv(const ShapMatrix& shap, const std::vector<Timestamp>& hours) {
  if (hours.size() != shap.rows()) throw std::invalid_argument("hour count differs from SHAP rows");
  std::string out = "hour";
  for (const auto& name : shap.feature_names) out += ",phi_" + name;
  out += ",base_value,prediction\n";
  for (std::size_t i = 0; i < shap.rows(); ++i) {
    out += format_timestamp(hours[i]);
    for (std::size_t j = 0; j < shap.phi.cols; ++j) out += "," + csv::format_double(shap.phi.at(i, j));
    out += "," + csv::format_double(shap.base_values[i]);
    out += "," + csv::format_double(shap.predictions[i]) + "\n";
  }
  return out;
}

}  // namespace flowstab::treeshap
