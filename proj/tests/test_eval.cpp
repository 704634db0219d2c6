#include <doctest.h>

#include <random>

#include "graft/eval.hpp"
#include "oracles.hpp"

using namespace graft;

TEST_CASE("confusion_metrics hand values") {
  // scores: TP, FN, FP, TN at threshold 0.5
  const std::vector<double> scores = {0.9, 0.2, 0.7, 0.1};
  const std::vector<int> labels = {1, 1, 0, 0};
  const auto m = confusion_metrics(scores, labels);
  CHECK(m.accuracy == doctest::Approx(0.5));
  // precision 1/2, recall 1/2 -> F1 = 1/2
  CHECK(m.f1 == doctest::Approx(0.5));

  SUBCASE("degenerate F1 is zero, not NaN") {
    const std::vector<double> s = {0.1, 0.2};
    const std::vector<int> l = {1, 1};
    CHECK(confusion_metrics(s, l).f1 == 0.0);
  }
  SUBCASE("threshold is inclusive on the positive side") {
    const std::vector<double> s = {0.5};
    const std::vector<int> l = {1};
    CHECK(confusion_metrics(s, l).accuracy == 1.0);
  }
}

TEST_CASE("auc matches brute-force pair counting") {
  SUBCASE("hand value with a tie") {
    const std::vector<double> s = {0.1, 0.4, 0.4, 0.8};
    const std::vector<int> l = {0, 0, 1, 1};
    // pairs: (0.4,0.1)=1, (0.4,0.4)=0.5, (0.8,0.1)=1, (0.8,0.4)=1 -> 3.5/4
    CHECK(auc(s, l) == doctest::Approx(0.875));
    CHECK(auc(s, l) == doctest::Approx(oracle::auc_pairs(s, l)));
  }
  SUBCASE("random scores with heavy ties") {
    std::mt19937_64 rng(15);
    std::uniform_int_distribution<int> bucket(0, 4);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> s;
      std::vector<int> l;
      bool has0 = false, has1 = false;
      for (int i = 0; i < 60; ++i) {
        s.push_back(bucket(rng) / 4.0);
        l.push_back(coin(rng));
        has0 |= l.back() == 0;
        has1 |= l.back() == 1;
      }
      if (!has0 || !has1) continue;
      CHECK(auc(s, l) == doctest::Approx(oracle::auc_pairs(s, l)).epsilon(1e-12));
    }
  }
  SUBCASE("perfect and inverted separations") {
    const std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
    CHECK(auc(s, std::vector<int>{0, 0, 1, 1}) == doctest::Approx(1.0));
    CHECK(auc(s, std::vector<int>{1, 1, 0, 0}) == doctest::Approx(0.0));
  }
  SUBCASE("single class throws") {
    const std::vector<double> s = {0.1, 0.2};
    CHECK_THROWS_AS(auc(s, std::vector<int>{1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(auc(s, std::vector<int>{0, 0}), std::invalid_argument);
  }
}

TEST_CASE("CartModel separates an obvious continuous rule") {
  LabeledDataset ds;
  ds.schema.features = {{"x", FeatureKind::Continuous, Category::Loan},
                        {"g", FeatureKind::Categorical, Category::History},
                        {"z", FeatureKind::Continuous, Category::Soft}};
  ds.schema.label_column = "y";
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const double x = unit(rng);
    ds.rows.push_back({x, std::string(i % 2 ? "A" : "B"), unit(rng)});
    ds.labels.push_back(x >= 0.6 ? 1 : 0);
  }
  const auto cart = CartModel::fit(ds, 4, 5);
  int correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    correct += (cart.predict(ds.rows[i]) >= 0.5 ? 1 : 0) == ds.labels[i];
  CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) >= 0.97);
  CHECK(cart.depth() <= 4);
  CHECK(cart.leaf_count() >= 2);
}

TEST_CASE("CartModel uses categorical equality splits") {
  LabeledDataset ds;
  ds.schema.features = {{"x", FeatureKind::Continuous, Category::Loan},
                        {"g", FeatureKind::Categorical, Category::History},
                        {"z", FeatureKind::Continuous, Category::Soft}};
  ds.schema.label_column = "y";
  for (int i = 0; i < 200; ++i) {
    const char* gs[] = {"A", "B", "C", "D"};
    const std::string g = gs[i % 4];
    ds.rows.push_back({1.0, g, 2.0});
    ds.labels.push_back(g == "C" ? 1 : 0);
  }
  const auto cart = CartModel::fit(ds, 3, 1);
  CHECK(cart.predict({1.0, std::string("C"), 2.0}) == doctest::Approx(1.0));
  CHECK(cart.predict({1.0, std::string("A"), 2.0}) == doctest::Approx(0.0));
  // unseen value follows the not-equal branch
  CHECK(cart.predict({1.0, std::string("Z"), 2.0}) == doctest::Approx(0.0));
}

TEST_CASE("CartModel depth 0 is a single prior leaf") {
  LabeledDataset ds;
  ds.schema.features = {{"x", FeatureKind::Continuous, Category::Loan},
                        {"g", FeatureKind::Categorical, Category::History},
                        {"z", FeatureKind::Continuous, Category::Soft}};
  ds.schema.label_column = "y";
  for (int i = 0; i < 10; ++i) {
    ds.rows.push_back({static_cast<double>(i), std::string("A"), 0.0});
    ds.labels.push_back(i < 3 ? 1 : 0);
  }
  const auto cart = CartModel::fit(ds, 0, 1);
  CHECK(cart.leaf_count() == 1);
  CHECK(cart.predict(ds.rows[0]) == doctest::Approx(0.3));
}

TEST_CASE("cross_validate produces averaged comparable rows") {
  SyntheticSpec spec;
  spec.n_rows = 400;
  spec.n_binary_features = 4;
  spec.planted_rules = parse_rule_expr("(f0&f2)");
  spec.seed = 4;
  const auto ds = generate_synthetic(spec);

  CrossValConfig cfg;
  cfg.k = 3;
  cfg.seed = 9;
  cfg.train.hidden_per_subnet = 8;
  cfg.train.batch_size = 16;
  cfg.train.learning_rate = 0.2;
  cfg.train.pretrain_epochs = 25;
  cfg.train.joint_epochs = 50;
  cfg.cart_max_depth = 6;

  int hook_calls = 0;
  const auto r = cross_validate(ds, cfg, [&](int fold, const Binarizer& b) {
    CHECK(fold == hook_calls);
    CHECK(b.width() > 0);
    ++hook_calls;
  });
  CHECK(hook_calls == 3);
  CHECK(r.model.model == "Our Model");
  CHECK(r.cart.model == "CART");
  CHECK(r.model.folds == 3);
  CHECK(r.model.averaged);
  REQUIRE(r.model_folds.size() == 3);
  REQUIRE(r.cart_folds.size() == 3);

  double mean_acc = 0.0;
  for (const auto& f : r.model_folds) mean_acc += f.accuracy;
  CHECK(r.model.metrics.accuracy == doctest::Approx(mean_acc / 3.0));
  // a planted conjunction is easy for both models
  CHECK(r.model.metrics.accuracy > 0.9);
  CHECK(r.cart.metrics.accuracy > 0.9);
  CHECK(r.model.metrics.auc >= 0.5);
  CHECK(r.model.metrics.auc <= 1.0);

  const std::string table = metrics_table_text(r);
  CHECK(table.find("Our Model") != std::string::npos);
  CHECK(table.find("CART") != std::string::npos);
  CHECK(table.find("AUC") != std::string::npos);

  const std::string csv = metrics_csv(r);
  CHECK(csv.rfind("model,", 0) == 0);
  int lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + 2 * 3 + 2);  // header, per-fold rows, two averages

  SUBCASE("deterministic per seed") {
    const auto again = cross_validate(ds, cfg);
    CHECK(again.model.metrics.accuracy == r.model.metrics.accuracy);
    CHECK(again.model.metrics.auc == r.model.metrics.auc);
    CHECK(metrics_csv(again) == csv);
  }
}

TEST_CASE("cross_validate rejects bad k") {
  SyntheticSpec spec;
  spec.n_rows = 20;
  spec.n_binary_features = 3;
  spec.planted_rules = {{{0}}};
  const auto ds = generate_synthetic(spec);
  CrossValConfig cfg;
  cfg.k = 1;
  CHECK_THROWS_AS(cross_validate(ds, cfg), std::invalid_argument);
}
