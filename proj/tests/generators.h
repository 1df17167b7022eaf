#pragma once

// Random inputs shared by unit and acceptance tests.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "flowstab/gbdt.h"
#include "flowstab/ingest.h"

namespace gen {

// One hour at 1 s: ramp, sine, noise, or a mix, with optional gaps.
inline flowstab::ingest::FrequencyTrace random_hour(std::mt19937_64& rng, int kind,
                                                    double gap_rate) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  flowstab::ingest::FrequencyTrace t;
  t.area_id = "X";
  t.start = flowstab::parse_timestamp("2021-06-01T00:00:00Z");
  const double a = 0.1 * (u(rng) - 0.5);
  const double b = 1e-4 * (u(rng) - 0.5);
  const double phase = 2.0 * std::numbers::pi * u(rng);
  const double period = 300.0 + 3300.0 * u(rng);
  for (int i = 0; i < 3600; ++i) {
    double f = 50.0;
    switch (kind % 4) {
      case 0:
        f += a + b * i;
        break;
      case 1:
        f += a * std::sin(2.0 * std::numbers::pi * i / period + phase);
        break;
      case 2:
        f += 0.02 * noise(rng);
        break;
      default:
        f += (i < 900 ? b * i : b * 900) + 0.01 * noise(rng);
        break;
    }
    t.samples.push_back(f);
    t.gap_mask.push_back(u(rng) < gap_rate);
  }
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (t.gap_mask[i]) t.samples[i] = std::nan("");
  }
  return t;
}

// Random tree with consistent covers; split features < num_features.
inline void grow(flowstab::gbdt::Tree& tree, int node, int depth, int max_depth, int num_features,
                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto& n = tree.nodes[static_cast<std::size_t>(node)];
  if (depth >= max_depth || n.cover < 2.0 || u(rng) < 0.2) {
    n.leaf_value = 4.0 * (u(rng) - 0.5);
    return;
  }
  n.split_feature = static_cast<int>(rng() % static_cast<std::uint64_t>(num_features));
  n.threshold = 2.0 * (u(rng) - 0.5);
  n.default_left = u(rng) < 0.5;
  const double left_cover = std::max(1.0, std::round(n.cover * (0.1 + 0.8 * u(rng))));
  const double right_cover = n.cover - left_cover;
  if (right_cover < 1.0) {
    n.split_feature = -1;
    n.leaf_value = 4.0 * (u(rng) - 0.5);
    return;
  }
  const int l = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes.back().cover = left_cover;
  const int r = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes.back().cover = right_cover;
  tree.nodes[static_cast<std::size_t>(node)].left = l;
  tree.nodes[static_cast<std::size_t>(node)].right = r;
  grow(tree, l, depth + 1, max_depth, num_features, rng);
  grow(tree, r, depth + 1, max_depth, num_features, rng);
}

inline flowstab::gbdt::TreeEnsemble random_ensemble(std::mt19937_64& rng, int num_features,
                                                    int max_depth, int num_trees) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  flowstab::gbdt::TreeEnsemble e;
  e.base_score = u(rng) - 0.5;
  e.learning_rate = 0.05 + 0.95 * u(rng);
  for (int j = 0; j < num_features; ++j) e.feature_names.push_back("f" + std::to_string(j));
  for (int k = 0; k < num_trees; ++k) {
    flowstab::gbdt::Tree t;
    t.nodes.push_back({});
    t.nodes[0].cover = std::round(20.0 + 500.0 * u(rng));
    grow(t, 0, 0, max_depth, num_features, rng);
    e.trees.push_back(std::move(t));
  }
  return e;
}

// Row in [-1.2, 1.2] with some NaN entries.
inline std::vector<double> random_row(std::mt19937_64& rng, int num_features, double nan_rate) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> row;
  for (int j = 0; j < num_features; ++j) {
    row.push_back(u(rng) < nan_rate ? std::nan("") : 2.4 * (u(rng) - 0.5));
  }
  return row;
}

inline flowstab::gbdt::Dataset regression_data(std::mt19937_64& rng, std::size_t n, int p,
                                               double nan_rate = 0.0) {
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  flowstab::gbdt::Dataset d;
  d.x = flowstab::gbdt::Matrix(n, static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) d.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      d.x.at(i, static_cast<std::size_t>(j)) = u(rng);
    }
    const double x0 = d.x.at(i, 0);
    const double x1 = p > 1 ? d.x.at(i, 1) : 0.0;
    d.y.push_back(3.0 * x0 + std::sin(4.0 * x1) + noise(rng));
    for (int j = 0; j < p; ++j) {
      if (nan_rate > 0.0 && (u(rng) + 1.0) / 2.0 < nan_rate) {
        d.x.at(i, static_cast<std::size_t>(j)) = std::nan("");
      }
    }
  }
  return d;
}

}  // namespace gen
