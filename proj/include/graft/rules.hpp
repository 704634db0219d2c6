#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "graft/binarizer.hpp"
#include "graft/conjnet.hpp"

namespace graft {

struct Rule {
  int subnet = 0;
  std::vector<int> bits;  // global bit indices, sorted; empty = TRUE rule
  double out_weight = 0.0;       // summed v over merged hidden nodes
  double effective_weight = 0.0; // u_s * out_weight
  double influence = 0.5;        // sigmoid(effective_weight); > 0.5 = negative factor
};

class RuleBook {
 public:
  RuleBook() = default;

  const std::array<std::vector<Rule>, kNumCategories>& rules() const { return rules_; }
  const std::array<double, kNumCategories>& subnet_weights() const { return agg_weights_; }
  const Binarizer& binarizer() const { return binarizer_; }
  std::uint64_t layout_hash() const { return layout_hash_; }

  struct Evaluation {
    double prob = 0.0;
    double logit = 0.0;
    std::array<std::vector<int>, kNumCategories> active;  // rule indices
  };

  // Bit-exact match with forward_discrete on the source model.
  Evaluation evaluate(std::span<const std::uint8_t> x) const;

  std::string render_rule(const Rule& r) const;

  nlohmann::json to_json() const;
  static RuleBook from_json(const nlohmann::json& j);

  friend RuleBook extract_rules(const GraftedModel& m, const Binarizer& b);

 private:
  std::array<std::vector<Rule>, kNumCategories> rules_;
  // Evaluation keeps the model's hidden-node order so floating-point
  // accumulation matches forward_discrete exactly.
  std::array<std::vector<std::pair<int, double>>, kNumCategories> node_rule_;
  std::array<double, kNumCategories> agg_weights_{};
  std::array<double, kNumCategories> out_bias_{};
  double agg_bias_ = 0.0;
  std::array<std::pair<int, int>, kNumCategories> spans_{};
  std::uint64_t layout_hash_ = 0;
  Binarizer binarizer_;
};

// One rule per hidden node (threshold 0.5 on the continuous weights);
// duplicate predicate sets within a subnet merged with summed output weight.
RuleBook extract_rules(const GraftedModel& m, const Binarizer& b);

// Table-style global report: per-subnet weight, rules sorted by
// |effective weight| descending, TRUE rules in a separate bias section.
std::string global_explanation_text(const RuleBook& rb);
nlohmann::json global_explanation_json(const RuleBook& rb);

struct LocalReport {
  std::vector<std::uint8_t> input_bits;
  double probability = 0.0;
  int decision = 0;  // 1 = charged off
  std::array<std::vector<int>, kNumCategories> active_rules;
  struct Reason {
    int subnet;
    int rule_index;
    std::vector<std::string> predicates;
    double influence;
  };
  std::vector<Reason> reasons;  // active non-TRUE rules with influence > 0.5
};

LocalReport local_explanation(const GraftedModel& m, const RuleBook& rb,
                              const std::vector<Cell>& row);

nlohmann::json local_report_json(const RuleBook& rb, const LocalReport& lr);

}  // namespace graft
