#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace graft {

enum class FeatureKind { Continuous, Categorical };

// The three feature groups, one subnet each.
enum class Category : int { Loan = 0, History = 1, Soft = 2 };
inline constexpr int kNumCategories = 3;

const char* category_name(Category c);
Category category_from_string(const std::string& s);

struct FeatureDef {
  std::string name;
  FeatureKind kind;
  Category category;
};

struct FeatureSchema {
  std::vector<FeatureDef> features;
  std::string label_column;

  // Throws std::invalid_argument on duplicate names or an empty category.
  void validate() const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);
};

// A raw cell is numeric for continuous features, text for categorical ones.
using Cell = std::variant<double, std::string>;

struct LabeledDataset {
  FeatureSchema schema;
  std::vector<std::vector<Cell>> rows;  // cells in schema.features order
  std::vector<int> labels;              // 0 = fully paid, 1 = charged off

  std::size_t size() const { return rows.size(); }
};

struct LoadStats {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_label = 0;    // Current or unrecognized status
  std::size_t dropped_invalid = 0;  // unparseable / missing feature values
};

// RFC-4180-style CSV with a header row. Labels: Fully Paid -> 0,
// Charged Off -> 1, Current dropped. Rows with missing or unparseable
// feature values are dropped and counted.
LabeledDataset load_csv(const std::string& path, const FeatureSchema& schema,
                        LoadStats* stats = nullptr);

void write_csv(const LabeledDataset& ds, const std::string& path);

// Uniform subsample without replacement, deterministic per seed.
LabeledDataset sample_rows(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

// Disjoint test folds covering every row, sizes differing by at most one.
std::vector<std::pair<LabeledDataset, LabeledDataset>> kfold_split(
    const LabeledDataset& ds, int k, std::uint64_t seed);

// A planted conjunction: label fires when every listed feature equals 1.
struct PlantedRule {
  std::vector<int> features;
};

struct SyntheticSpec {
  int n_rows = 0;
  int n_binary_features = 0;  // split into thirds: loan, history, soft
  std::vector<PlantedRule> planted_rules;
  double label_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

// Binary features drawn uniformly; label = 1 iff any planted rule holds,
// then flipped with probability label_noise. Features are categorical
// "0"/"1" so the normal binarizer path applies.
LabeledDataset generate_synthetic(const SyntheticSpec& spec);

// Parses expressions like "(f0&f2)|(f1&f3)" into planted conjunctions.
std::vector<PlantedRule> parse_rule_expr(const std::string& expr);

}  // namespace graft
