#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "graft/dataset.hpp"

namespace graft {

struct BinningScheme {
  std::string feature;
  std::vector<double> thresholds;  // strictly increasing; k thresholds = k+1 bins
};

struct BinningConfig {
  int max_depth = 3;
  int min_leaf = 0;  // 0 -> max(50, 1% of rows)
};

enum class PredicateKind { Bin, CategoryValue, CategoryOther };

struct BitInfo {
  int feature;  // index into schema.features
  Category category;
  PredicateKind kind;
  int bin = -1;       // Bin: index into [0, thresholds.size()]
  std::string value;  // CategoryValue: the matched category
};

// Thresholds are the internal split values of a single-feature CART
// (Gini impurity, midpoint candidates), depth-limited. Constant features
// yield an empty list (single bin).
BinningScheme fit_bins(std::span<const double> values, std::span<const int> labels,
                       int max_depth, int min_leaf);

class Binarizer {
 public:
  Binarizer() = default;

  static Binarizer fit(const LabeledDataset& ds, const BinningConfig& cfg);

  int width() const { return static_cast<int>(layout_.size()); }
  const std::vector<BitInfo>& layout() const { return layout_; }
  const FeatureSchema& schema() const { return schema_; }

  // (offset, width) of each category's contiguous bit block.
  const std::array<std::pair<int, int>, kNumCategories>& category_spans() const {
    return spans_;
  }

  const BinningScheme& bins(int feature) const { return bins_[feature]; }
  const std::vector<std::string>& vocabulary(int feature) const { return vocab_[feature]; }

  // Exactly one bit set per feature.
  std::vector<std::uint8_t> transform(const std::vector<Cell>& row) const;
  void transform_into(const std::vector<Cell>& row, std::uint8_t* out) const;

  // Renders e.g. "8.0 <= InterestRate < 12.0" or "Grade = A".
  std::string predicate_text(int bit) const;

  // True iff the row's raw value satisfies the bit's predicate.
  bool predicate_holds(int bit, const std::vector<Cell>& row) const;

  std::uint64_t layout_hash() const { return hash_; }

  nlohmann::json to_json() const;
  static Binarizer from_json(const nlohmann::json& j);

 private:
  void rebuild_index();

  FeatureSchema schema_;
  std::vector<BinningScheme> bins_;             // per feature; empty for categorical
  std::vector<std::vector<std::string>> vocab_; // per feature; empty for continuous
  std::vector<BitInfo> layout_;
  std::array<std::pair<int, int>, kNumCategories> spans_{};
  std::vector<int> feature_offset_;  // first bit of each feature
  std::uint64_t hash_ = 0;
};

// Dense binarized dataset, the network's training input.
struct BinarizedData {
  int width = 0;
  std::size_t n = 0;
  std::vector<std::uint8_t> bits;  // row-major n x width
  std::vector<int> labels;

  std::span<const std::uint8_t> row(std::size_t i) const {
    return {bits.data() + i * static_cast<std::size_t>(width),
            static_cast<std::size_t>(width)};
  }
};

BinarizedData binarize_all(const Binarizer& b, const LabeledDataset& ds);

}  // namespace graft
