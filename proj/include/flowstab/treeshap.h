#pragma once

#include <span>
#include <string>
#include <vector>

#include "flowstab/gbdt.h"
#include "flowstab/time.h"

namespace flowstab::treeshap {

// Additive attribution of one prediction: base_value + sum(phi) == prediction.
struct ShapResult {
  double base_value = 0.0;
  std::vector<double> phi;
  double prediction = 0.0;
};

// Cover-weighted expected output of the ensemble (the base value).
double expected_value(const gbdt::TreeEnsemble& ensemble);

// Path-dependent TreeSHAP: absent features are marginalized by descending
// both children in proportion to their training covers. Polynomial in tree
// depth. Throws gbdt::ModelFormatError on a zero-cover internal node and
// std::invalid_argument on arity mismatch.
ShapResult shap_exact(const gbdt::TreeEnsemble& ensemble, std::span<const double> row);

inline constexpr std::size_t kMaxBruteForceFeatures = 20;

// Shapley values of the same cover-weighted game by explicit enumeration
// of all 2^n feature subsets. Intended as a conformance oracle; throws
// std::invalid_argument beyond kMaxBruteForceFeatures features.
ShapResult shap_bruteforce(const gbdt::TreeEnsemble& ensemble, std::span<const double> row);

struct ShapMatrix {
  std::vector<std::string> feature_names;
  gbdt::Matrix phi;  // rows x features
  std::vector<double> base_values;
  std::vector<double> predictions;

  std::size_t rows() const { return phi.rows; }
  std::vector<double> column(std::size_t feature) const;
  ShapResult row(std::size_t i) const;
};

// shap_exact over every row. Validates the model once; `jobs` > 1 splits
// rows across threads with identical results.
ShapMatrix shap_batch(const gbdt::TreeEnsemble& ensemble, const gbdt::Matrix& rows, int jobs = 1);

// `hour,phi_<feature>...,base_value,prediction`
std::string format_shap_csv(const ShapMatrix& shap, const std::vector<Timestamp>& hours);

}  // namespace flowstab::treeshap
