#include "graft/binarizer.hpp"

#include <algorithm>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "graft/common.hpp"

namespace graft {

namespace {

double gini(std::size_t pos, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(pos) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

struct SortedFeature {
  std::vector<double> values;  // ascending
  std::vector<int> labels;     // aligned
};

// Greedy recursive splitting on [lo, hi); appends chosen thresholds.
void split_node(const SortedFeature& f, std::size_t lo, std::size_t hi, int depth,
                int max_depth, int min_leaf, std::vector<double>& out) {
  const std::size_t n = hi - lo;
  if (depth >= max_depth || n < 2 * static_cast<std::size_t>(min_leaf)) return;
  std::size_t pos_total = 0;
  for (std::size_t i = lo; i < hi; ++i) pos_total += f.labels[i];
  if (pos_total == 0 || pos_total == n) return;  // pure node

  const double parent = gini(pos_total, n);
  double best_score = parent - 1e-12;
  double best_thresh = 0.0;
  std::size_t best_split = 0;
  std::size_t pos_left = 0;
  for (std::size_t i = lo; i + 1 < hi; ++i) {
    pos_left += f.labels[i];
    if (f.values[i] == f.values[i + 1]) continue;
    const std::size_t n_left = i - lo + 1;
    const std::size_t n_right = n - n_left;
    if (n_left < static_cast<std::size_t>(min_leaf) ||
        n_right < static_cast<std::size_t>(min_leaf))
      continue;
    const double score = (static_cast<double>(n_left) * gini(pos_left, n_left) +
                          static_cast<double>(n_right) * gini(pos_total - pos_left, n_right)) /
                         static_cast<double>(n);
    if (score < best_score) {
      best_score = score;
      best_thresh = 0.5 * (f.values[i] + f.values[i + 1]);
      best_split = i + 1;
    }
  }
  if (best_split == 0) return;
  out.push_back(best_thresh);
  split_node(f, lo, best_split, depth + 1, max_depth, min_leaf, out);
  split_node(f, best_split, hi, depth + 1, max_depth, min_leaf, out);
}

}  // namespace

BinningScheme fit_bins(std::span<const double> values, std::span<const int> labels,
                       int max_depth, int min_leaf) {
  if (values.size() != labels.size())
    throw std::invalid_argument("fit_bins: values/labels length mismatch");
  if (min_leaf < 1) min_leaf = 1;

  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  SortedFeature f;
  f.values.reserve(values.size());
  f.labels.reserve(values.size());
  for (std::size_t i : order) {
    f.values.push_back(values[i]);
    f.labels.push_back(labels[i]);
  }

  BinningScheme scheme;
  split_node(f, 0, f.values.size(), 0, max_depth, min_leaf, scheme.thresholds);
  std::sort(scheme.thresholds.begin(), scheme.thresholds.end());
  return scheme;
}

Binarizer Binarizer::fit(const LabeledDataset& ds, const BinningConfig& cfg) {
  if (ds.rows.empty()) throw std::invalid_argument("fit_binarizer: empty dataset");
  ds.schema.validate();

  Binarizer b;
  b.schema_ = ds.schema;
  const std::size_t nf = ds.schema.features.size();
  b.bins_.resize(nf);
  b.vocab_.resize(nf);

  const int min_leaf = cfg.min_leaf > 0
                           ? cfg.min_leaf
                           : std::max<int>(50, static_cast<int>(ds.rows.size() / 100));

  for (std::size_t fi = 0; fi < nf; ++fi) {
    const FeatureDef& fd = ds.schema.features[fi];
    if (fd.kind == FeatureKind::Continuous) {
      std::vector<double> vals;
      vals.reserve(ds.rows.size());
      for (const auto& row : ds.rows) {
        if (!std::holds_alternative<double>(row[fi]))
          throw std::invalid_argument("non-numeric value in continuous feature " + fd.name);
        vals.push_back(std::get<double>(row[fi]));
      }
      b.bins_[fi] = fit_bins(vals, ds.labels, cfg.max_depth, min_leaf);
      b.bins_[fi].feature = fd.name;
      if (b.bins_[fi].thresholds.empty())
        std::cerr << "warning: feature '" << fd.name
                  << "' produced no split (single bin)\n";
    } else {
      std::vector<std::string> vocab;
      for (const auto& row : ds.rows) vocab.push_back(std::get<std::string>(row[fi]));
      std::sort(vocab.begin(), vocab.end());
      vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
      b.vocab_[fi] = std::move(vocab);
    }
  }

  // Bits grouped contiguously by category: loan, then history, then soft.
  for (int c = 0; c < kNumCategories; ++c) {
    const int offset = static_cast<int>(b.layout_.size());
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const FeatureDef& fd = ds.schema.features[fi];
      if (static_cast<int>(fd.category) != c) continue;
      if (fd.kind == FeatureKind::Continuous) {
        const int nbins = static_cast<int>(b.bins_[fi].thresholds.size()) + 1;
        for (int bin = 0; bin < nbins; ++bin)
          b.layout_.push_back({static_cast<int>(fi), fd.category, PredicateKind::Bin, bin, ""});
      } else {
        for (const auto& v : b.vocab_[fi])
          b.layout_.push_back(
              {static_cast<int>(fi), fd.category, PredicateKind::CategoryValue, -1, v});
        b.layout_.push_back(
            {static_cast<int>(fi), fd.category, PredicateKind::CategoryOther, -1, ""});
      }
    }
    b.spans_[c] = {offset, static_cast<int>(b.layout_.size()) - offset};
  }
  b.rebuild_index();
  return b;
}

void Binarizer::rebuild_index() {
  feature_offset_.assign(schema_.features.size(), -1);
  std::uint64_t h = fnv1a("layout/v1");
  for (std::size_t bit = 0; bit < layout_.size(); ++bit) {
    const BitInfo& info = layout_[bit];
    if (feature_offset_[info.feature] < 0)
      feature_offset_[info.feature] = static_cast<int>(bit);
    h = fnv1a(category_name(info.category), h);
    h = fnv1a(predicate_text(static_cast<int>(bit)), h);
  }
  hash_ = h;
}

void Binarizer::transform_into(const std::vector<Cell>& row, std::uint8_t* out) const {
  if (row.size() != schema_.features.size())
    throw std::invalid_argument("transform: row width does not match schema");
  std::fill(out, out + layout_.size(), std::uint8_t{0});
  for (std::size_t fi = 0; fi < schema_.features.size(); ++fi) {
    const int offset = feature_offset_[fi];
    if (schema_.features[fi].kind == FeatureKind::Continuous) {
      if (!std::holds_alternative<double>(row[fi]))
        throw std::invalid_argument("transform: non-numeric value in continuous feature " +
                                    schema_.features[fi].name);
      const double v = std::get<double>(row[fi]);
      const auto& ts = bins_[fi].thresholds;
      // Right-closed bins: value >= threshold falls in the upper bin.
      const int bin =
          static_cast<int>(std::upper_bound(ts.begin(), ts.end(), v) - ts.begin());
      out[offset + bin] = 1;
    } else {
      const std::string& v = std::get<std::string>(row[fi]);
      const auto& vocab = vocab_[fi];
      auto it = std::lower_bound(vocab.begin(), vocab.end(), v);
      if (it != vocab.end() && *it == v)
        out[offset + (it - vocab.begin())] = 1;
      else
        out[offset + static_cast<int>(vocab.size())] = 1;  // `other` bit
    }
  }
}

std::vector<std::uint8_t> Binarizer::transform(const std::vector<Cell>& row) const {
  std::vector<std::uint8_t> out(layout_.size());
  transform_into(row, out.data());
  return out;
}

std::string Binarizer::predicate_text(int bit) const {
  if (bit < 0 || bit >= width()) throw std::out_of_range("predicate_text: bit out of range");
  const BitInfo& info = layout_[bit];
  const std::string& name = schema_.features[info.feature].name;
  switch (info.kind) {
    case PredicateKind::CategoryValue:
      return name + " = " + info.value;
    case PredicateKind::CategoryOther:
      return name + " = <other>";
    case PredicateKind::Bin: {
      const auto& ts = bins_[info.feature].thresholds;
      if (ts.empty()) return name + " = any";
      if (info.bin == 0) return name + " < " + format_double(ts.front());
      if (info.bin == static_cast<int>(ts.size()))
        return name + " >= " + format_double(ts.back());
      return format_double(ts[info.bin - 1]) + " <= " + name + " < " +
             format_double(ts[info.bin]);
    }
  }
  return "?";
}

bool Binarizer::predicate_holds(int bit, const std::vector<Cell>& row) const {
  if (bit < 0 || bit >= width()) throw std::out_of_range("predicate_holds: bit out of range");
  const BitInfo& info = layout_[bit];
  if (info.kind == PredicateKind::Bin) {
    const double v = std::get<double>(row[info.feature]);
    const auto& ts = bins_[info.feature].thresholds;
    const int bin = static_cast<int>(std::upper_bound(ts.begin(), ts.end(), v) - ts.begin());
    return bin == info.bin;
  }
  const std::string& v = std::get<std::string>(row[info.feature]);
  const auto& vocab = vocab_[info.feature];
  if (info.kind == PredicateKind::CategoryValue) return v == info.value;
  return !std::binary_search(vocab.begin(), vocab.end(), v);
}

nlohmann::json Binarizer::to_json() const {
  nlohmann::json jbins = nlohmann::json::array();
  for (const auto& bs : bins_) jbins.push_back({{"feature", bs.feature},
                                                {"thresholds", bs.thresholds}});
  nlohmann::json jlayout = nlohmann::json::array();
  for (const auto& info : layout_) {
    jlayout.push_back({{"feature", info.feature},
                       {"category", category_name(info.category)},
                       {"kind", static_cast<int>(info.kind)},
                       {"bin", info.bin},
                       {"value", info.value}});
  }
  return {{"schema", schema_.to_json()},
          {"bins", jbins},
          {"vocab", vocab_},
          {"layout", jlayout},
          {"layout_hash", hash_}};
}

Binarizer Binarizer::from_json(const nlohmann::json& j) {
  Binarizer b;
  b.schema_ = FeatureSchema::from_json(j.at("schema"));
  for (const auto& jb : j.at("bins")) {
    BinningScheme bs;
    bs.feature = jb.at("feature").get<std::string>();
    bs.thresholds = jb.at("thresholds").get<std::vector<double>>();
    b.bins_.push_back(std::move(bs));
  }
  b.vocab_ = j.at("vocab").get<std::vector<std::vector<std::string>>>();
  for (const auto& jl : j.at("layout")) {
    BitInfo info;
    info.feature = jl.at("feature").get<int>();
    info.category = category_from_string(jl.at("category").get<std::string>());
    info.kind = static_cast<PredicateKind>(jl.at("kind").get<int>());
    info.bin = jl.at("bin").get<int>();
    info.value = jl.at("value").get<std::string>();
    b.layout_.push_back(std::move(info));
  }
  for (int c = 0; c < kNumCategories; ++c) {
    int offset = -1, count = 0;
    for (std::size_t bit = 0; bit < b.layout_.size(); ++bit) {
      if (static_cast<int>(b.layout_[bit].category) != c) continue;
      if (offset < 0) offset = static_cast<int>(bit);
      ++count;
    }
    b.spans_[c] = {offset < 0 ? 0 : offset, count};
  }
  b.rebuild_index();
  if (j.contains("layout_hash") && j.at("layout_hash").get<std::uint64_t>() != b.hash_)
    throw std::runtime_error("binarizer: layout hash mismatch in serialized form");
  return b;
}

BinarizedData binarize_all(const Binarizer& b, const LabeledDataset& ds) {
  BinarizedData out;
  out.width = b.width();
  out.n = ds.size();
  out.bits.resize(out.n * static_cast<std::size_t>(out.width));
  out.labels = ds.labels;
  for (std::size_t i = 0; i < out.n; ++i)
    b.transform_into(ds.rows[i], out.bits.data() + i * static_cast<std::size_t>(out.width));
  return out;
}

}  // namespace graft
