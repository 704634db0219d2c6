#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "graft/binarizer.hpp"
#include "graft/rules.hpp"

namespace graft {

struct AnchorConfig {
  double tau = 0.95;       // target precision
  int budget = 8;          // max anchor size
  int samples = 1000;      // Monte Carlo perturbations per candidate
  std::uint64_t seed = 0;
  bool against_all_active = false;  // faithfulness vs all active rules
};

struct Anchor {
  std::vector<int> bits;  // sorted global bit indices, all set in the instance
  double precision = 1.0;
  double coverage = 1.0;
  int samples_used = 0;
  bool low_precision = false;  // budget exhausted below tau
};

// Greedy simplified Anchor: repeatedly add the instance-true bit that
// maximizes Monte Carlo precision under per-feature marginal resampling
// (one-hot groups preserved) until precision >= tau or budget exhausted.
Anchor anchor_explain(const std::function<int(std::span<const std::uint8_t>)>& predict,
                      std::span<const std::uint8_t> instance, const Binarizer& binarizer,
                      const BinarizedData& reference, const AnchorConfig& cfg);

struct AuditVerdict {
  Anchor anchor;
  std::vector<int> true_path_bits;   // union over the judged active rules
  std::vector<int> extraneous_bits;  // anchor bits off the true path
  bool faithful = true;
};

// Compares the anchor's predicates to the model's actual decision path:
// by default the active rules with influence > 0.5, optionally all active
// rules. Any anchor bit outside that union makes the verdict unfaithful.
AuditVerdict faithfulness_check(const Anchor& a, const RuleBook& rb,
                                const LocalReport& lr, bool against_all_active = false);

nlohmann::json audit_verdict_json(const AuditVerdict& v, const Binarizer& b,
                                  const AnchorConfig& cfg);

}  // namespace graft
