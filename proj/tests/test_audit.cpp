#include <doctest.h>

#include <random>
#include <set>

#include "graft/audit.hpp"
#include "graft/grafting.hpp"
#include "oracles.hpp"

using namespace graft;

namespace {

// Reference pool: every feature's value drawn uniformly, one-hot encoded.
BinarizedData uniform_reference(const Binarizer& b, std::size_t n, std::uint64_t seed) {
  BinarizedData data;
  data.width = b.width();
  data.n = n;
  data.bits.assign(n * static_cast<std::size_t>(b.width()), 0);
  data.labels.assign(n, 0);
  std::mt19937_64 rng(seed);
  const int n_features = static_cast<int>(b.schema().features.size());
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<Cell> row;
    for (int f = 0; f < n_features; ++f)
      row.emplace_back(std::string(rng() % 2 ? "1" : "0"));
    b.transform_into(row, data.bits.data() + r * static_cast<std::size_t>(b.width()));
  }
  return data;
}

int true_bit(const Binarizer& b, int feature, const std::string& value) {
  for (int bit = 0; bit < b.width(); ++bit) {
    const auto& info = b.layout()[bit];
    if (info.feature == feature && info.kind == PredicateKind::CategoryValue &&
        info.value == value)
      return bit;
  }
  throw std::runtime_error("bit not found");
}

}  // namespace

TEST_CASE("anchor recovers the bits a deterministic classifier depends on") {
  const auto b = oracle::binary_binarizer(4);
  const auto reference = uniform_reference(b, 400, 1);
  const int bit_f0 = true_bit(b, 0, "1");
  const int bit_f2 = true_bit(b, 2, "1");

  // classifier = f0 AND f2, nothing else
  auto predict = [&](std::span<const std::uint8_t> x) {
    return x[bit_f0] && x[bit_f2] ? 1 : 0;
  };

  std::vector<Cell> row = {std::string("1"), std::string("0"), std::string("1"),
                           std::string("0")};
  const auto instance = b.transform(row);

  AnchorConfig cfg;
  cfg.tau = 0.99;
  cfg.samples = 400;
  cfg.seed = 11;
  const auto a = anchor_explain(predict, instance, b, reference, cfg);

  CHECK(a.bits == std::vector<int>{bit_f0, bit_f2});
  CHECK(a.precision == 1.0);  // anchored bits fully determine the output
  CHECK_FALSE(a.low_precision);
  CHECK(a.samples_used >= cfg.samples);
  // coverage = fraction of reference rows with both bits set, about 1/4
  CHECK(a.coverage == doctest::Approx(0.25).epsilon(0.35));
}

TEST_CASE("anchor respects tau and budget edge cases") {
  const auto b = oracle::binary_binarizer(3);
  const auto reference = uniform_reference(b, 200, 2);
  const int bit_f0 = true_bit(b, 0, "1");
  auto predict = [&](std::span<const std::uint8_t> x) { return x[bit_f0] ? 1 : 0; };
  std::vector<Cell> row = {std::string("1"), std::string("1"), std::string("1")};
  const auto instance = b.transform(row);

  SUBCASE("tau = 0 yields the empty anchor with precision 1") {
    AnchorConfig cfg;
    cfg.tau = 0.0;
    const auto a = anchor_explain(predict, instance, b, reference, cfg);
    CHECK(a.bits.empty());
    CHECK(a.precision == 1.0);
    CHECK(a.coverage == 1.0);
    CHECK(a.samples_used == 0);
  }
  SUBCASE("budget 0 flags low precision when tau is unreachable") {
    AnchorConfig cfg;
    cfg.tau = 0.99;
    cfg.budget = 0;
    cfg.samples = 200;
    const auto a = anchor_explain(predict, instance, b, reference, cfg);
    CHECK(a.bits.empty());
    CHECK(a.low_precision);
  }
  SUBCASE("deterministic per seed") {
    AnchorConfig cfg;
    cfg.tau = 0.95;
    cfg.samples = 100;
    cfg.seed = 77;
    const auto a1 = anchor_explain(predict, instance, b, reference, cfg);
    const auto a2 = anchor_explain(predict, instance, b, reference, cfg);
    CHECK(a1.bits == a2.bits);
    CHECK(a1.precision == a2.precision);
  }
  SUBCASE("argument errors") {
    AnchorConfig cfg;
    cfg.tau = 1.5;
    CHECK_THROWS_AS(anchor_explain(predict, instance, b, reference, cfg),
                    std::invalid_argument);
    cfg.tau = 0.9;
    cfg.samples = 0;
    CHECK_THROWS_AS(anchor_explain(predict, instance, b, reference, cfg),
                    std::invalid_argument);
    cfg.samples = 10;
    CHECK_THROWS_AS(anchor_explain(predict, instance, b, BinarizedData{}, cfg),
                    std::invalid_argument);
    std::vector<std::uint8_t> short_x(b.width() - 1, 1);
    CHECK_THROWS_AS(anchor_explain(predict, short_x, b, reference, cfg),
                    std::invalid_argument);
  }
}

TEST_CASE("faithfulness_check separates on-path from extraneous anchors") {
  const auto b = oracle::binary_binarizer(3);
  // Model whose only meaningful rule is f0=1 with a strongly negative weight.
  GraftedModel m = init_model(b, 2, 0);
  const int bit_f0 = true_bit(b, 0, "1");
  const int bit_f1 = true_bit(b, 1, "1");
  auto& sn = m.subnets[0];
  std::fill(sn.weights.begin(), sn.weights.end(), 0.0);
  sn.weights[static_cast<std::size_t>(0) * sn.width + (bit_f0 - m.spans[0].first)] = 1.0;
  sn.out_weights = {3.0, 0.0};
  m.agg_weights = {2.0, 0.0, 0.0};
  const auto rb = extract_rules(m, b);

  const std::vector<Cell> row = {std::string("1"), std::string("1"), std::string("0")};
  const auto lr = local_explanation(m, rb, row);
  REQUIRE(!lr.reasons.empty());

  SUBCASE("anchor inside the decision path is faithful") {
    Anchor a;
    a.bits = {bit_f0};
    const auto v = faithfulness_check(a, rb, lr);
    CHECK(v.faithful);
    CHECK(v.extraneous_bits.empty());
    CHECK(std::set<int>(v.true_path_bits.begin(), v.true_path_bits.end()).count(bit_f0));
  }
  SUBCASE("anchor bit off the path is flagged") {
    Anchor a;
    a.bits = {bit_f0, bit_f1};
    const auto v = faithfulness_check(a, rb, lr);
    CHECK_FALSE(v.faithful);
    CHECK(v.extraneous_bits == std::vector<int>{bit_f1});
  }
  SUBCASE("against all active rules widens the path") {
    // f1's TRUE-only subnet contributes no bits either way, but positive
    // non-empty rules join the path only in all-active mode.
    auto& sn1 = m.subnets[1];
    GraftedModel m2 = m;
    auto& t = m2.subnets[1];
    std::fill(t.weights.begin(), t.weights.end(), 0.0);
    t.weights[static_cast<std::size_t>(0) * t.width + (bit_f1 - m2.spans[1].first)] = 1.0;
    t.out_weights = {-1.0, 0.0};  // positive factor: influence < 0.5
    m2.agg_weights[1] = 2.0;
    (void)sn1;
    const auto rb2 = extract_rules(m2, b);
    const auto lr2 = local_explanation(m2, rb2, row);
    Anchor a;
    a.bits = {bit_f1};
    CHECK_FALSE(faithfulness_check(a, rb2, lr2, false).faithful);
    CHECK(faithfulness_check(a, rb2, lr2, true).faithful);
  }
  SUBCASE("anchor bit not set in the instance is an argument error") {
    Anchor a;
    a.bits = {true_bit(b, 2, "1")};  // row has f2 = "0"
    CHECK_THROWS_AS(faithfulness_check(a, rb, lr), std::invalid_argument);
  }

  SUBCASE("verdict json carries predicates and verdict string") {
    Anchor a;
    a.bits = {bit_f0, bit_f1};
    const auto v = faithfulness_check(a, rb, lr);
    AnchorConfig cfg;
    const auto j = audit_verdict_json(v, b, cfg);
    CHECK(j.at("verdict") == "unfaithful");
    CHECK(j.at("anchor").at("bits").size() == 2);
    CHECK(j.at("extraneous_predicates").size() == 1);
    CHECK(j.at("config").at("against") == "negative");
  }
}

TEST_CASE("end-to-end audit on a trained planted-rule model") {
  SyntheticSpec spec;
  spec.n_rows = 600;
  spec.n_binary_features = 4;
  // f0 and f1 share a category, so one conjunction node can represent the
  // whole rule and the anchor's bits land inside a single negative rule.
  spec.planted_rules = parse_rule_expr("(f0&f1)");
  spec.seed = 21;
  const auto ds = generate_synthetic(spec);
  const auto b = Binarizer::fit(ds, {});
  const auto data = binarize_all(b, ds);

  TrainConfig cfg;
  cfg.hidden_per_subnet = 8;
  cfg.batch_size = 32;
  cfg.pretrain_epochs = 20;
  cfg.joint_epochs = 40;
  cfg.seed = 2;
  GraftedModel m = init_model(b, cfg.hidden_per_subnet, cfg.seed);
  train_joint(m, data, cfg);
  REQUIRE(evaluate_discrete(m, data, cfg.eps).acc_d >= 0.95);
  const auto rb = extract_rules(m, b);

  // pick a positive (charged-off) instance
  std::size_t pos = 0;
  while (pos < ds.size() && ds.labels[pos] == 0) ++pos;
  REQUIRE(pos < ds.size());
  const auto lr = local_explanation(m, rb, ds.rows[pos]);

  auto predict = [&](std::span<const std::uint8_t> x) {
    return forward_discrete(m, x).prob >= 0.5 ? 1 : 0;
  };
  AnchorConfig acfg;
  acfg.tau = 0.95;
  acfg.samples = 300;
  acfg.seed = 3;
  const auto anchor = anchor_explain(predict, lr.input_bits, b, data, acfg);
  const auto verdict = faithfulness_check(anchor, rb, lr);
  // a well-trained planted-rule model should admit a faithful anchor
  CHECK_FALSE(anchor.low_precision);
  CHECK(verdict.faithful);
}
