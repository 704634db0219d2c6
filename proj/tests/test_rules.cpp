#include <doctest.h>

#include <random>
#include <set>

#include "graft/common.hpp"
#include "graft/rules.hpp"
#include "oracles.hpp"

using namespace graft;

namespace {

// Model with hand-chosen binary hidden weights so the extracted rules are
// known exactly. Subnet 0 gets two duplicate nodes plus a TRUE node.
GraftedModel handmade_model(const Binarizer& b) {
  GraftedModel m = init_model(b, 3, 0);
  for (int s = 0; s < kNumCategories; ++s) {
    auto& sn = m.subnets[s];
    std::fill(sn.weights.begin(), sn.weights.end(), 0.0);
    sn.out_weights = {1.5, -0.5, 0.25};
    sn.out_bias = 0.1 * (s + 1);
    m.agg_weights[s] = s == 2 ? -1.0 : 2.0;
  }
  m.agg_bias = -0.3;
  // subnet 0: node 0 and node 1 select bit 1 (duplicates), node 2 is TRUE
  m.subnets[0].weights[0 * m.subnets[0].width + 1] = 1.0;
  m.subnets[0].weights[1 * m.subnets[0].width + 1] = 0.7;  // >= 0.5 -> same bit
  // subnet 1: node 0 selects local bits 0 and 2
  m.subnets[1].weights[0 * m.subnets[1].width + 0] = 0.9;
  m.subnets[1].weights[0 * m.subnets[1].width + 2] = 0.6;
  return m;
}

}  // namespace

TEST_CASE("extract_rules merges duplicates and keeps TRUE rules") {
  const auto b = oracle::binary_binarizer(4);
  const auto m = handmade_model(b);
  const auto rb = extract_rules(m, b);

  const auto& r0 = rb.rules()[0];
  REQUIRE(r0.size() == 2);  // merged conjunction + TRUE
  const Rule* conj = r0[0].bits.empty() ? &r0[1] : &r0[0];
  const Rule* tru = r0[0].bits.empty() ? &r0[0] : &r0[1];
  CHECK(conj->bits == std::vector<int>{m.spans[0].first + 1});
  CHECK(conj->out_weight == doctest::Approx(1.5 - 0.5));  // summed over duplicates
  CHECK(tru->bits.empty());
  CHECK(tru->out_weight == doctest::Approx(0.25));
  CHECK(conj->effective_weight == doctest::Approx(2.0 * 1.0));
  CHECK(conj->influence == doctest::Approx(sigmoid(2.0)));

  const auto& r1 = rb.rules()[1];
  const Rule* pair = nullptr;
  for (const auto& r : r1)
    if (r.bits.size() == 2) pair = &r;
  REQUIRE(pair != nullptr);
  CHECK(pair->bits ==
        std::vector<int>{m.spans[1].first + 0, m.spans[1].first + 2});

  SUBCASE("layout hash mismatch is rejected") {
    const auto other = oracle::binary_binarizer(5);
    CHECK_THROWS_AS(extract_rules(m, other), std::runtime_error);
  }
}

TEST_CASE("rulebook evaluation is bit-exact with forward_discrete") {
  const auto b = oracle::binary_binarizer(4);
  std::mt19937_64 rng(31);
  for (int mi = 0; mi < 3; ++mi) {
    const auto m = oracle::random_model(b, 7, 400 + mi);
    const auto rb = extract_rules(m, b);
    for (int trial = 0; trial < 500; ++trial) {
      const auto x = oracle::bits_of(rng(), b.width());
      const auto want = forward_discrete(m, x);
      const auto got = rb.evaluate(x);
      // exact equality, not approximate: summation order must match
      CHECK(got.logit == want.logit);
      CHECK(got.prob == want.prob);
      for (int s = 0; s < kNumCategories; ++s) {
        std::set<int> active_nodes;
        for (int j = 0; j < m.subnets[s].hidden; ++j)
          if (want.active[s][j]) active_nodes.insert(j);
        // every active rule corresponds to at least one active node
        for (int ri : got.active[s]) {
          bool matched = false;
          for (int j = 0; j < m.subnets[s].hidden; ++j) {
            const auto wj = m.subnets[s].node(j);
            std::vector<int> bits;
            for (int i = 0; i < m.subnets[s].width; ++i)
              if (wj[i] >= 0.5) bits.push_back(m.spans[s].first + i);
            if (bits == rb.rules()[s][ri].bits && want.active[s][j]) matched = true;
          }
          CHECK(matched);
        }
      }
    }
  }
}

TEST_CASE("rulebook evaluation rejects wrong width") {
  const auto b = oracle::binary_binarizer(4);
  const auto rb = extract_rules(oracle::random_model(b, 3, 1), b);
  std::vector<std::uint8_t> x(b.width() + 1, 0);
  CHECK_THROWS_AS(rb.evaluate(x), std::invalid_argument);
}

TEST_CASE("rulebook serialization preserves bit-exact evaluation") {
  const auto b = oracle::binary_binarizer(4);
  const auto m = oracle::random_model(b, 6, 77);
  const auto rb = extract_rules(m, b);
  const auto back = RuleBook::from_json(rb.to_json());
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = oracle::bits_of(rng(), b.width());
    CHECK(back.evaluate(x).logit == rb.evaluate(x).logit);
  }
  CHECK(back.layout_hash() == rb.layout_hash());
  CHECK(back.to_json() == rb.to_json());
}

TEST_CASE("render_rule and the global explanation") {
  const auto b = oracle::binary_binarizer(4);
  const auto m = handmade_model(b);
  const auto rb = extract_rules(m, b);

  const Rule* tru = nullptr;
  for (const auto& r : rb.rules()[0])
    if (r.bits.empty()) tru = &r;
  REQUIRE(tru != nullptr);
  CHECK(rb.render_rule(*tru) == "TRUE");

  const std::string text = global_explanation_text(rb);
  CHECK(text.find("Subnet: Loan Information") != std::string::npos);
  CHECK(text.find("Subnet: History Information") != std::string::npos);
  CHECK(text.find("Subnet: Soft Information") != std::string::npos);
  CHECK(text.find("bias rules:") != std::string::npos);
  CHECK(text.find("[negative]") != std::string::npos);
  CHECK(text.find(" AND ") != std::string::npos);

  const auto j = global_explanation_json(rb);
  REQUIRE(j.at("subnets").size() == 3);
  // rules sorted by |effective weight| descending
  for (const auto& sn : j.at("subnets")) {
    double prev = 1e300;
    for (const auto& r : sn.at("rules")) {
      const double mag =
          std::abs(sn.at("subnet_weight").get<double>() * r.at("out_weight").get<double>());
      CHECK(mag <= prev + 1e-12);
      prev = mag;
    }
  }
}

TEST_CASE("local explanation lists active negative rules as reasons") {
  const auto b = oracle::binary_binarizer(3);
  const auto m = handmade_model(b);
  const auto rb = extract_rules(m, b);

  // raw row where feature 0 = "1": bit layout per feature is ["0","1",other]
  const std::vector<Cell> row = {std::string("1"), std::string("0"), std::string("1")};
  const auto lr = local_explanation(m, rb, row);
  const auto x = rb.binarizer().transform(row);
  CHECK(lr.input_bits == x);
  const auto out = forward_discrete(m, x);
  CHECK(lr.probability == out.prob);
  CHECK(lr.decision == (out.prob >= 0.5 ? 1 : 0));

  for (const auto& reason : lr.reasons) {
    const Rule& r = rb.rules()[reason.subnet][reason.rule_index];
    CHECK(r.influence > 0.5);
    CHECK(!r.bits.empty());
    // reason rules really are active on this input
    for (int bit : r.bits) CHECK(x[bit] == 1);
    CHECK(reason.predicates.size() == r.bits.size());
  }
  // completeness: every active non-TRUE rule with influence > 0.5 is a reason
  std::size_t expected = 0;
  for (int s = 0; s < kNumCategories; ++s)
    for (int ri : lr.active_rules[s]) {
      const Rule& r = rb.rules()[s][ri];
      if (!r.bits.empty() && r.influence > 0.5) ++expected;
    }
  CHECK(lr.reasons.size() == expected);

  const auto j = local_report_json(rb, lr);
  CHECK((j.at("decision") == "charged_off" || j.at("decision") == "fully_paid"));
  CHECK(j.at("probability").get<double>() == lr.probability);
  CHECK(j.at("reasons").size() == lr.reasons.size());
  CHECK(j.at("active_rules").size() == 3);
}

TEST_CASE("local explanation checks layout compatibility") {
  const auto b3 = oracle::binary_binarizer(3);
  const auto b4 = oracle::binary_binarizer(4);
  const auto m = oracle::random_model(b4, 2, 0);
  const auto rb = extract_rules(oracle::random_model(b3, 2, 0), b3);
  CHECK_THROWS_AS(
      local_explanation(m, rb, {std::string("1"), std::string("0"), std::string("1")}),
      std::runtime_error);
}
