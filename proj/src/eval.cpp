#include "graft/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "graft/common.hpp"

namespace graft {

Metrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                          double threshold) {
  if (scores.empty() || scores.size() != labels.size())
    throw std::invalid_argument("confusion_metrics: empty or mismatched input");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++tp;
    else if (pred) ++fp;
    else if (labels[i] == 1) ++fn;
    else ++tn;
  }
  Metrics m;
  m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  const double denom = static_cast<double>(2 * tp + fp + fn);
  m.f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  return m;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty() || scores.size() != labels.size())
    throw std::invalid_argument("auc: empty or mismatched input");
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += (y == 1);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: needs both classes present");

  // Rank-sum formulation; tied scores get the mean rank of their block.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += mean_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                      static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

CartModel CartModel::fit(const LabeledDataset& ds, int max_depth, int min_leaf) {
  if (ds.rows.empty()) throw std::invalid_argument("cart_fit: empty dataset");
  if (min_leaf < 1) min_leaf = 1;
  CartModel model;

  struct Frame {
    std::vector<std::size_t> idx;
    int depth;
    int node;
  };

  auto gini2 = [](std::size_t pos, std::size_t n) {
    if (n == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(n);
    return 2.0 * p * (1.0 - p);
  };

  std::vector<std::size_t> all(ds.rows.size());
  std::iota(all.begin(), all.end(), 0);
  model.nodes_.push_back({});
  std::vector<Frame> stack;
  stack.push_back({std::move(all), 0, 0});

  while (!stack.empty()) {
    Frame fr = std::move(stack.back());
    stack.pop_back();
    Node& node = model.nodes_[fr.node];
    const std::size_t n = fr.idx.size();
    std::size_t pos = 0;
    for (std::size_t i : fr.idx) pos += ds.labels[i];

    node.prob = static_cast<double>(pos) / static_cast<double>(n);
    if (fr.depth >= max_depth || pos == 0 || pos == n ||
        n < 2 * static_cast<std::size_t>(min_leaf))
      continue;  // stays a leaf

    const double parent = gini2(pos, n);
    double best = parent - 1e-12;
    int best_feature = -1;
    bool best_cat = false;
    double best_thresh = 0.0;
    std::string best_value;

    for (std::size_t fi = 0; fi < ds.schema.features.size(); ++fi) {
      if (ds.schema.features[fi].kind == FeatureKind::Continuous) {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(n);
        for (std::size_t i : fr.idx)
          vals.emplace_back(std::get<double>(ds.rows[i][fi]), ds.labels[i]);
        std::sort(vals.begin(), vals.end());
        std::size_t pos_left = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          pos_left += vals[i].second;
          if (vals[i].first == vals[i + 1].first) continue;
          const std::size_t nl = i + 1, nr = n - nl;
          if (nl < static_cast<std::size_t>(min_leaf) ||
              nr < static_cast<std::size_t>(min_leaf))
            continue;
          const double score =
              (static_cast<double>(nl) * gini2(pos_left, nl) +
               static_cast<double>(nr) * gini2(pos - pos_left, nr)) /
              static_cast<double>(n);
          if (score < best) {
            best = score;
            best_feature = static_cast<int>(fi);
            best_cat = false;
            best_thresh = 0.5 * (vals[i].first + vals[i + 1].first);
          }
        }
      } else {
        std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts;
        for (std::size_t i : fr.idx) {
          auto& c = counts[std::get<std::string>(ds.rows[i][fi])];
          ++c.first;
          c.second += ds.labels[i];
        }
        if (counts.size() < 2) continue;
        // Deterministic order regardless of hash-map iteration.
        std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> sorted(
            counts.begin(), counts.end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [value, c] : sorted) {
          const std::size_t nl = c.first, nr = n - nl;
          if (nl < static_cast<std::size_t>(min_leaf) ||
              nr < static_cast<std::size_t>(min_leaf))
            continue;
          const double score =
              (static_cast<double>(nl) * gini2(c.second, nl) +
               static_cast<double>(nr) * gini2(pos - c.second, nr)) /
              static_cast<double>(n);
          if (score < best) {
            best = score;
            best_feature = static_cast<int>(fi);
            best_cat = true;
            best_value = value;
          }
        }
      }
    }
    if (best_feature < 0) continue;

    std::vector<std::size_t> left, right;
    for (std::size_t i : fr.idx) {
      bool goes_left;
      if (best_cat)
        goes_left = std::get<std::string>(ds.rows[i][best_feature]) == best_value;
      else
        goes_left = std::get<double>(ds.rows[i][best_feature]) < best_thresh;
      (goes_left ? left : right).push_back(i);
    }

    const int left_id = static_cast<int>(model.nodes_.size());
    const int right_id = left_id + 1;
    model.nodes_.push_back({});
    model.nodes_.push_back({});
    // re-fetch: push_back may have reallocated the node storage
    Node& split = model.nodes_[fr.node];
    split.feature = best_feature;
    split.categorical = best_cat;
    split.threshold = best_thresh;
    split.value = best_value;
    split.left = left_id;
    split.right = right_id;
    stack.push_back({std::move(left), fr.depth + 1, left_id});
    stack.push_back({std::move(right), fr.depth + 1, right_id});
  }
  return model;
}

double CartModel::predict(const std::vector<Cell>& row) const {
  int cur = 0;
  while (nodes_[cur].feature >= 0) {
    const Node& n = nodes_[cur];
    bool left;
    if (n.categorical)
      left = std::get<std::string>(row[n.feature]) == n.value;
    else
      left = std::get<double>(row[n.feature]) < n.threshold;
    cur = left ? n.left : n.right;
  }
  return nodes_[cur].prob;
}

int CartModel::depth() const {
  std::function<int(int)> rec = [&](int id) -> int {
    if (nodes_[id].feature < 0) return 0;
    return 1 + std::max(rec(nodes_[id].left), rec(nodes_[id].right));
  };
  return nodes_.empty() ? 0 : rec(0);
}

std::size_t CartModel::leaf_count() const {
  std::size_t count = 0;
  for (const auto& n : nodes_) count += (n.feature < 0);
  return count;
}

CrossValResult cross_validate(
    const LabeledDataset& ds, const CrossValConfig& cfg,
    const std::function<void(int fold, const Binarizer&)>& fold_hook) {
  if (cfg.k < 2) throw std::invalid_argument("cross_validate: k must be >= 2");
  CrossValResult result;
  const auto folds = kfold_split(ds, cfg.k, cfg.seed);

  int fold_index = 0;
  for (const auto& [train, test] : folds) {
    try {
      const Binarizer bin = Binarizer::fit(train, cfg.binning);
      if (fold_hook) fold_hook(fold_index, bin);
      const BinarizedData train_bits = binarize_all(bin, train);
      GraftedModel model = init_model(bin, cfg.train.hidden_per_subnet, cfg.train.seed);
      TrainConfig tc = cfg.train;
      train_joint(model, train_bits, tc);

      std::vector<double> model_scores(test.size()), cart_scores(test.size());
      for (std::size_t i = 0; i < test.size(); ++i)
        model_scores[i] = forward_discrete(model, bin.transform(test.rows[i])).prob;

      const CartModel cart = CartModel::fit(train, cfg.cart_max_depth, cfg.cart_min_leaf);
      for (std::size_t i = 0; i < test.size(); ++i)
        cart_scores[i] = cart.predict(test.rows[i]);

      Metrics mm = confusion_metrics(model_scores, test.labels);
      mm.auc = auc(model_scores, test.labels);
      Metrics cm = confusion_metrics(cart_scores, test.labels);
      cm.auc = auc(cart_scores, test.labels);
      result.model_folds.push_back(mm);
      result.cart_folds.push_back(cm);
    } catch (const std::exception& e) {
      throw std::runtime_error("cross_validate: fold " + std::to_string(fold_index) +
                               ": " + e.what());
    }
    ++fold_index;
  }

  auto average = [&](const std::vector<Metrics>& folds_m, const std::string& name) {
    MetricsRow row;
    row.model = name;
    row.folds = cfg.k;
    row.averaged = true;
    for (const auto& m : folds_m) {
      row.metrics.accuracy += m.accuracy;
      row.metrics.f1 += m.f1;
      row.metrics.auc += m.auc;
    }
    const double inv = 1.0 / static_cast<double>(folds_m.size());
    row.metrics.accuracy *= inv;
    row.metrics.f1 *= inv;
    row.metrics.auc *= inv;
    return row;
  };
  result.model = average(result.model_folds, "Our Model");
  result.cart = average(result.cart_folds, "CART");
  return result;
}

namespace {
std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}
}  // namespace

std::string metrics_table_text(const CrossValResult& r) {
  std::ostringstream out;
  out << "Model      Accuracy  F1-Score  AUC\n";
  for (const MetricsRow* row : {&r.model, &r.cart}) {
    out << row->model;
    for (std::size_t i = row->model.size(); i < 11; ++i) out << ' ';
    out << fmt3(row->metrics.accuracy) << "     " << fmt3(row->metrics.f1) << "     "
        << fmt3(row->metrics.auc) << '\n';
  }
  return out.str();
}

std::string metrics_csv(const CrossValResult& r) {
  std::ostringstream out;
  out << "model,fold,accuracy,f1,auc\n";
  auto emit_folds = [&](const std::string& name, const std::vector<Metrics>& folds_m) {
    for (std::size_t i = 0; i < folds_m.size(); ++i)
      out << name << ',' << i << ',' << format_double(folds_m[i].accuracy) << ','
          << format_double(folds_m[i].f1) << ',' << format_double(folds_m[i].auc) << '\n';
  };
  emit_folds("Our Model", r.model_folds);
  emit_folds("CART", r.cart_folds);
  auto emit_avg = [&](const MetricsRow& row) {
    out << row.model << ",avg," << format_double(row.metrics.accuracy) << ','
        << format_double(row.metrics.f1) << ',' << format_double(row.metrics.auc) << '\n';
  };
  emit_avg(r.model);
  emit_avg(r.cart);
  return out.str();
}

}  // namespace graft
