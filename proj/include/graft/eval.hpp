#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "graft/binarizer.hpp"
#include "graft/dataset.hpp"
#include "graft/grafting.hpp"

namespace graft {

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
};

// Accuracy and F1 on the positive class at the given score threshold.
// F1 = 0 when precision + recall = 0.
Metrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                          double threshold = 0.5);

// Mann-Whitney AUC via rank sums, ties counting one half. Throws on
// single-class input.
double auc(std::span<const double> scores, std::span<const int> labels);

struct MetricsRow {
  std::string model;
  Metrics metrics;
  int folds = 1;
  bool averaged = false;
};

// From-scratch CART over raw features: Gini splits, midpoint thresholds
// for continuous features, equality tests for categorical ones, leaves
// emit the positive-class fraction.
class CartModel {
 public:
  static CartModel fit(const LabeledDataset& ds, int max_depth = 10, int min_leaf = 5);

  double predict(const std::vector<Cell>& row) const;
  int depth() const;
  std::size_t leaf_count() const;

 private:
  struct Node {
    int feature = -1;  // -1 = leaf
    bool categorical = false;
    double threshold = 0.0;  // continuous: < goes left
    std::string value;       // categorical: == goes left
    double prob = 0.0;       // leaf positive fraction
    int left = -1, right = -1;
  };
  std::vector<Node> nodes_;
};

struct CrossValConfig {
  int k = 5;
  std::uint64_t seed = 0;
  BinningConfig binning;
  TrainConfig train;
  int cart_max_depth = 10;
  int cart_min_leaf = 5;
};

struct CrossValResult {
  MetricsRow model;
  MetricsRow cart;
  std::vector<Metrics> model_folds;
  std::vector<Metrics> cart_folds;
};

// Per fold: binarizer fitted on train only, grafted model trained on
// train, both models scored on test; CART runs on the same folds over
// raw features. The hook (if set) sees each fold's fitted binarizer.
CrossValResult cross_validate(
    const LabeledDataset& ds, const CrossValConfig& cfg,
    const std::function<void(int fold, const Binarizer&)>& fold_hook = {});

std::string metrics_table_text(const CrossValResult& r);
std::string metrics_csv(const CrossValResult& r);

}  // namespace graft
