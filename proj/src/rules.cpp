#include "graft/rules.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "graft/common.hpp"

namespace graft {

namespace {
const char* subnet_display(int s) {
  switch (static_cast<Category>(s)) {
    case Category::Loan: return "Loan Information";
    case Category::History: return "History Information";
    case Category::Soft: return "Soft Information";
  }
  return "?";
}
}  // namespace

RuleBook extract_rules(const GraftedModel& m, const Binarizer& b) {
  if (m.layout_hash != b.layout_hash())
    throw std::runtime_error("extract_rules: model and binarizer layouts are incompatible");
  RuleBook rb;
  rb.agg_weights_ = m.agg_weights;
  rb.agg_bias_ = m.agg_bias;
  rb.spans_ = m.spans;
  rb.layout_hash_ = m.layout_hash;
  rb.binarizer_ = b;
  for (int s = 0; s < kNumCategories; ++s) {
    const SubnetParams& sn = m.subnets[s];
    rb.out_bias_[s] = sn.out_bias;
    std::map<std::vector<int>, int> seen;
    for (int j = 0; j < sn.hidden; ++j) {
      std::vector<int> bits;
      const double* w = sn.weights.data() + static_cast<std::size_t>(j) * sn.width;
      for (int i = 0; i < sn.width; ++i)
        if (w[i] >= kDiscretizeThreshold) bits.push_back(m.spans[s].first + i);
      auto [it, fresh] = seen.emplace(bits, static_cast<int>(rb.rules_[s].size()));
      if (fresh) {
        Rule r;
        r.subnet = s;
        r.bits = bits;
        rb.rules_[s].push_back(std::move(r));
      }
      rb.rules_[s][it->second].out_weight += sn.out_weights[j];
      rb.node_rule_[s].emplace_back(it->second, sn.out_weights[j]);
    }
    for (Rule& r : rb.rules_[s]) {
      r.effective_weight = m.agg_weights[s] * r.out_weight;
      r.influence = sigmoid(r.effective_weight);
    }
  }
  return rb;
}

RuleBook::Evaluation RuleBook::evaluate(std::span<const std::uint8_t> x) const {
  int width = 0;
  for (const auto& sp : spans_) width += sp.second;
  if (static_cast<int>(x.size()) != width)
    throw std::invalid_argument("rulebook: input width mismatch");

  Evaluation ev;
  std::array<double, kNumCategories> probs{};
  for (int s = 0; s < kNumCategories; ++s) {
    std::vector<std::uint8_t> rule_active(rules_[s].size(), 0);
    for (std::size_t r = 0; r < rules_[s].size(); ++r) {
      std::uint8_t act = 1;
      for (int bit : rules_[s][r].bits) {
        if (!x[bit]) {
          act = 0;
          break;
        }
      }
      rule_active[r] = act;
      if (act) ev.active[s].push_back(static_cast<int>(r));
    }
    // Node order matches the source model so the sum is bit-exact.
    double g = out_bias_[s];
    for (const auto& [rule_idx, v] : node_rule_[s])
      if (rule_active[rule_idx]) g += v;
    probs[s] = sigmoid(g);
  }
  double z = agg_bias_;
  for (int s = 0; s < kNumCategories; ++s) z += agg_weights_[s] * probs[s];
  ev.logit = z;
  ev.prob = sigmoid(z);
  return ev;
}

std::string RuleBook::render_rule(const Rule& r) const {
  if (r.bits.empty()) return "TRUE";
  std::string out;
  for (std::size_t i = 0; i < r.bits.size(); ++i) {
    if (i) out += " AND ";
    out += binarizer_.predicate_text(r.bits[i]);
  }
  return out;
}

nlohmann::json RuleBook::to_json() const {
  nlohmann::json jrules = nlohmann::json::array();
  nlohmann::json jnodes = nlohmann::json::array();
  for (int s = 0; s < kNumCategories; ++s) {
    nlohmann::json jr = nlohmann::json::array();
    for (const auto& r : rules_[s])
      jr.push_back({{"bits", r.bits},
                    {"out_weight", r.out_weight},
                    {"effective_weight", r.effective_weight},
                    {"influence", r.influence}});
    jrules.push_back(std::move(jr));
    nlohmann::json jn = nlohmann::json::array();
    for (const auto& [idx, v] : node_rule_[s]) jn.push_back({idx, v});
    jnodes.push_back(std::move(jn));
  }
  nlohmann::json jspans = nlohmann::json::array();
  for (const auto& sp : spans_) jspans.push_back({sp.first, sp.second});
  return {{"rules", jrules},
          {"node_rules", jnodes},
          {"agg_weights", agg_weights_},
          {"agg_bias", agg_bias_},
          {"out_bias", out_bias_},
          {"spans", jspans},
          {"layout_hash", layout_hash_},
          {"binarizer", binarizer_.to_json()}};
}

RuleBook RuleBook::from_json(const nlohmann::json& j) {
  RuleBook rb;
  for (int s = 0; s < kNumCategories; ++s) {
    for (const auto& jr : j.at("rules").at(s)) {
      Rule r;
      r.subnet = s;
      r.bits = jr.at("bits").get<std::vector<int>>();
      r.out_weight = jr.at("out_weight").get<double>();
      r.effective_weight = jr.at("effective_weight").get<double>();
      r.influence = jr.at("influence").get<double>();
      rb.rules_[s].push_back(std::move(r));
    }
    for (const auto& jn : j.at("node_rules").at(s))
      rb.node_rule_[s].emplace_back(jn.at(0).get<int>(), jn.at(1).get<double>());
  }
  rb.agg_weights_ = j.at("agg_weights").get<std::array<double, kNumCategories>>();
  rb.agg_bias_ = j.at("agg_bias").get<double>();
  rb.out_bias_ = j.at("out_bias").get<std::array<double, kNumCategories>>();
  int s = 0;
  for (const auto& jsp : j.at("spans"))
    rb.spans_[s++] = {jsp.at(0).get<int>(), jsp.at(1).get<int>()};
  rb.layout_hash_ = j.at("layout_hash").get<std::uint64_t>();
  rb.binarizer_ = Binarizer::from_json(j.at("binarizer"));
  return rb;
}

namespace {

std::vector<std::size_t> sorted_by_effect(const std::vector<Rule>& rules, bool bias_rules) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rules.size(); ++i)
    if (rules[i].bits.empty() == bias_rules) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(rules[a].effective_weight) > std::abs(rules[b].effective_weight);
  });
  return idx;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string global_explanation_text(const RuleBook& rb) {
  std::ostringstream out;
  for (int s = 0; s < kNumCategories; ++s) {
    const auto& rules = rb.rules()[s];
    out << "Subnet: " << subnet_display(s) << "  (subnet weight "
        << fmt4(rb.subnet_weights()[s]) << ")\n";
    for (std::size_t i : sorted_by_effect(rules, false)) {
      const Rule& r = rules[i];
      out << "  [" << (r.influence > 0.5 ? "negative" : "positive") << "] weight "
          << fmt4(r.influence) << " (v=" << fmt4(r.out_weight)
          << "): " << rb.render_rule(r) << '\n';
    }
    const auto bias = sorted_by_effect(rules, true);
    if (!bias.empty()) {
      out << "  bias rules:\n";
      for (std::size_t i : bias)
        out << "    weight " << fmt4(rules[i].influence)
            << " (v=" << fmt4(rules[i].out_weight) << "): TRUE\n";
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json global_explanation_json(const RuleBook& rb) {
  nlohmann::json subnets = nlohmann::json::array();
  for (int s = 0; s < kNumCategories; ++s) {
    const auto& rules = rb.rules()[s];
    nlohmann::json jrules = nlohmann::json::array();
    for (std::size_t i : sorted_by_effect(rules, false)) {
      const Rule& r = rules[i];
      nlohmann::json preds = nlohmann::json::array();
      for (int bit : r.bits) preds.push_back(rb.binarizer().predicate_text(bit));
      jrules.push_back({{"predicates", preds},
                        {"bits", r.bits},
                        {"out_weight", r.out_weight},
                        {"influence", r.influence},
                        {"negative_factor", r.influence > 0.5}});
    }
    nlohmann::json jbias = nlohmann::json::array();
    for (std::size_t i : sorted_by_effect(rules, true))
      jbias.push_back({{"out_weight", rules[i].out_weight},
                       {"influence", rules[i].influence}});
    subnets.push_back({{"subnet", subnet_display(s)},
                       {"subnet_weight", rb.subnet_weights()[s]},
                       {"rules", jrules},
                       {"bias_rules", jbias}});
  }
  return {{"subnets", subnets}};
}

LocalReport local_explanation(const GraftedModel& m, const RuleBook& rb,
                              const std::vector<Cell>& row) {
  if (m.layout_hash != rb.layout_hash())
    throw std::runtime_error("local_explanation: model and rulebook are incompatible");
  const auto x = rb.binarizer().transform(row);
  const auto out = forward_discrete(m, x);
  const auto ev = rb.evaluate(x);

  LocalReport lr;
  lr.input_bits = x;
  lr.probability = out.prob;
  lr.decision = out.prob >= 0.5 ? 1 : 0;
  lr.active_rules = ev.active;
  for (int s = 0; s < kNumCategories; ++s) {
    for (int ri : ev.active[s]) {
      const Rule& r = rb.rules()[s][ri];
      if (r.bits.empty() || r.influence <= 0.5) continue;
      LocalReport::Reason reason;
      reason.subnet = s;
      reason.rule_index = ri;
      reason.influence = r.influence;
      for (int bit : r.bits)
        reason.predicates.push_back(rb.binarizer().predicate_text(bit));
      lr.reasons.push_back(std::move(reason));
    }
  }
  return lr;
}

nlohmann::json local_report_json(const RuleBook& rb, const LocalReport& lr) {
  nlohmann::json reasons = nlohmann::json::array();
  for (const auto& r : lr.reasons)
    reasons.push_back({{"subnet", subnet_display(r.subnet)},
                       {"predicates", r.predicates},
                       {"influence", r.influence}});
  nlohmann::json active = nlohmann::json::array();
  for (int s = 0; s < kNumCategories; ++s) {
    nlohmann::json ja = nlohmann::json::array();
    for (int ri : lr.active_rules[s])
      ja.push_back({{"rule", rb.render_rule(rb.rules()[s][ri])},
                    {"influence", rb.rules()[s][ri].influence}});
    active.push_back({{"subnet", subnet_display(s)}, {"active", ja}});
  }
  return {{"decision", lr.decision == 1 ? "charged_off" : "fully_paid"},
          {"probability", lr.probability},
          {"reasons", reasons},
          {"active_rules", active}};
}

}  // namespace graft
