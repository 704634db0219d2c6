#include "graft/audit.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

#include "graft/common.hpp"

namespace graft {

namespace {

// Contiguous bit group per feature, recovered from the layout.
std::vector<std::pair<int, int>> feature_groups(const Binarizer& b) {
  std::vector<std::pair<int, int>> groups;
  int current = -1;
  for (int bit = 0; bit < b.width(); ++bit) {
    const int f = b.layout()[bit].feature;
    if (f != current) {
      groups.emplace_back(bit, 0);
      current = f;
    }
    groups.back().second++;
  }
  return groups;
}

struct PrecisionEstimator {
  const std::function<int(std::span<const std::uint8_t>)>& predict;
  std::span<const std::uint8_t> instance;
  const BinarizedData& reference;
  const std::vector<std::pair<int, int>>& groups;
  int target_class;
  int samples;

  // Non-anchored features resampled independently from the reference
  // empirical distribution, one whole one-hot group at a time.
  double estimate(const std::vector<bool>& feature_anchored, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_row(0, reference.n - 1);
    std::vector<std::uint8_t> x(instance.begin(), instance.end());
    int same = 0;
    for (int s = 0; s < samples; ++s) {
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (feature_anchored[g]) continue;
        const auto src = reference.row(pick_row(rng));
        const auto [offset, width] = groups[g];
        std::copy(src.begin() + offset, src.begin() + offset + width, x.begin() + offset);
      }
      if (predict(x) == target_class) ++same;
    }
    return static_cast<double>(same) / static_cast<double>(samples);
  }
};

}  // namespace

Anchor anchor_explain(const std::function<int(std::span<const std::uint8_t>)>& predict,
                      std::span<const std::uint8_t> instance, const Binarizer& binarizer,
                      const BinarizedData& reference, const AnchorConfig& cfg) {
  if (cfg.tau < 0.0 || cfg.tau > 1.0)
    throw std::invalid_argument("anchor_explain: tau must be in [0, 1]");
  if (cfg.samples < 1) throw std::invalid_argument("anchor_explain: samples must be >= 1");
  if (reference.n == 0) throw std::invalid_argument("anchor_explain: empty reference set");
  if (static_cast<int>(instance.size()) != binarizer.width() ||
      reference.width != binarizer.width())
    throw std::invalid_argument("anchor_explain: width mismatch");

  const auto groups = feature_groups(binarizer);
  const int target = predict(instance);

  Anchor anchor;
  std::vector<bool> anchored(groups.size(), false);
  PrecisionEstimator est{predict, instance, reference, groups, target, cfg.samples};

  int round = 0;
  double precision =
      cfg.tau <= 0.0 ? 1.0 : est.estimate(anchored, fnv1a("anchor/0", cfg.seed));
  if (cfg.tau > 0.0) anchor.samples_used += cfg.samples;
  while (precision < cfg.tau && static_cast<int>(anchor.bits.size()) < cfg.budget) {
    ++round;
    int best_bit = -1;
    std::size_t best_group = 0;
    double best_precision = -1.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (anchored[g]) continue;
      // The feature's single true bit is the only viable candidate.
      int bit = -1;
      for (int i = groups[g].first; i < groups[g].first + groups[g].second; ++i)
        if (instance[i]) bit = i;
      if (bit < 0) continue;
      anchored[g] = true;
      const std::uint64_t seed =
          fnv1a("anchor/" + std::to_string(round) + "/" + std::to_string(bit), cfg.seed);
      const double p = est.estimate(anchored, seed);
      anchor.samples_used += cfg.samples;
      anchored[g] = false;
      if (p > best_precision) {
        best_precision = p;
        best_bit = bit;
        best_group = g;
      }
    }
    if (best_bit < 0) break;  // every feature already anchored
    anchored[best_group] = true;
    anchor.bits.push_back(best_bit);
    precision = best_precision;
  }
  std::sort(anchor.bits.begin(), anchor.bits.end());
  anchor.precision = precision;
  anchor.low_precision = precision < cfg.tau;

  std::size_t covered = 0;
  for (std::size_t r = 0; r < reference.n; ++r) {
    const auto row = reference.row(r);
    bool ok = true;
    for (int bit : anchor.bits) ok = ok && row[bit];
    covered += ok;
  }
  anchor.coverage = static_cast<double>(covered) / static_cast<double>(reference.n);
  return anchor;
}

AuditVerdict faithfulness_check(const Anchor& a, const RuleBook& rb,
                                const LocalReport& lr, bool against_all_active) {
  for (int bit : a.bits) {
    if (bit < 0 || bit >= static_cast<int>(lr.input_bits.size()) || !lr.input_bits[bit])
      throw std::invalid_argument(
          "faithfulness_check: anchor does not match the explained instance");
  }

  std::set<int> path;
  for (int s = 0; s < kNumCategories; ++s) {
    for (int ri : lr.active_rules[s]) {
      const Rule& r = rb.rules()[s][ri];
      if (!against_all_active && r.influence <= 0.5) continue;
      path.insert(r.bits.begin(), r.bits.end());
    }
  }

  AuditVerdict v;
  v.anchor = a;
  v.true_path_bits.assign(path.begin(), path.end());
  for (int bit : a.bits)
    if (!path.count(bit)) v.extraneous_bits.push_back(bit);
  v.faithful = v.extraneous_bits.empty();
  return v;
}

nlohmann::json audit_verdict_json(const AuditVerdict& v, const Binarizer& b,
                                  const AnchorConfig& cfg) {
  auto render_bits = [&](const std::vector<int>& bits) {
    nlohmann::json arr = nlohmann::json::array();
    for (int bit : bits) arr.push_back(b.predicate_text(bit));
    return arr;
  };
  return {{"anchor",
           {{"predicates", render_bits(v.anchor.bits)},
            {"bits", v.anchor.bits},
            {"precision", v.anchor.precision},
            {"coverage", v.anchor.coverage},
            {"samples_used", v.anchor.samples_used},
            {"low_precision", v.anchor.low_precision}}},
          {"true_path_predicates", render_bits(v.true_path_bits)},
          {"extraneous_predicates", render_bits(v.extraneous_bits)},
          {"verdict", v.faithful ? "faithful" : "unfaithful"},
          {"config",
           {{"tau", cfg.tau},
            {"budget", cfg.budget},
            {"samples", cfg.samples},
            {"seed", cfg.seed},
            {"against", cfg.against_all_active ? "all-active" : "negative"}}}};
}

}  // namespace graft
