#include "graft/conjnet.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "graft/common.hpp"

namespace graft {

double conj_activation(std::span<const double> w, std::span<const std::uint8_t> x) {
  if (w.size() != x.size())
    throw std::invalid_argument("conj_activation: length mismatch");
  double prod = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    prod *= 1.0 - w[i] * (1.0 - static_cast<double>(x[i]));
  return prod;
}

double conj_plus_activation(std::span<const double> w, std::span<const std::uint8_t> x,
                            double eps) {
  if (w.size() != x.size())
    throw std::invalid_argument("conj_plus_activation: length mismatch");
  if (eps <= 0.0) throw std::invalid_argument("conj_plus_activation: eps must be > 0");
  // Log-domain product: multiplication becomes addition, per-term clamp at eps.
  double log_conj = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (x[i]) continue;  // term is exactly 1
    const double term = 1.0 - w[i];
    log_conj += std::log(term > eps ? term : eps);
  }
  return -1.0 / (-1.0 + log_conj);
}

double conj_gradient(std::span<const double> w, std::span<const std::uint8_t> x,
                     std::size_t k) {
  if (w.size() != x.size())
    throw std::invalid_argument("conj_gradient: length mismatch");
  if (k >= w.size()) throw std::out_of_range("conj_gradient: index out of range");
  double prod = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i == k) continue;
    prod *= 1.0 - w[i] * (1.0 - static_cast<double>(x[i]));
  }
  return (static_cast<double>(x[k]) - 1.0) * prod;
}

std::vector<std::uint8_t> discretize(std::span<const double> w, double threshold) {
  std::vector<std::uint8_t> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] >= threshold ? 1 : 0;
  return out;
}

int GraftedModel::total_width() const {
  int w = 0;
  for (const auto& s : subnets) w += s.width;
  return w;
}

namespace {

void check_width(const GraftedModel& m, std::span<const std::uint8_t> x) {
  if (static_cast<int>(x.size()) != m.total_width())
    throw std::invalid_argument("forward: input width does not match model layout");
}

}  // namespace

NetworkOutputs forward_continuous(const GraftedModel& m, std::span<const std::uint8_t> x,
                                  double eps) {
  check_width(m, x);
  NetworkOutputs out;
  for (int s = 0; s < kNumCategories; ++s) {
    const SubnetParams& sn = m.subnets[s];
    const auto xs = x.subspan(m.spans[s].first, sn.width);
    out.hidden[s].resize(sn.hidden);
    double g = sn.out_bias;
    for (int j = 0; j < sn.hidden; ++j) {
      const double a = conj_plus_activation(sn.node(j), xs, eps);
      out.hidden[s][j] = a;
      g += sn.out_weights[j] * a;
    }
    out.subnet_prob[s] = sigmoid(g);
  }
  double z = m.agg_bias;
  for (int s = 0; s < kNumCategories; ++s) z += m.agg_weights[s] * out.subnet_prob[s];
  out.logit = z;
  out.prob = sigmoid(z);
  return out;
}

NetworkOutputs forward_discrete(const GraftedModel& m, std::span<const std::uint8_t> x) {
  check_width(m, x);
  NetworkOutputs out;
  for (int s = 0; s < kNumCategories; ++s) {
    const SubnetParams& sn = m.subnets[s];
    const std::uint8_t* xs = x.data() + m.spans[s].first;
    out.hidden[s].resize(sn.hidden);
    out.active[s].resize(sn.hidden);
    double g = sn.out_bias;
    for (int j = 0; j < sn.hidden; ++j) {
      const double* w = sn.weights.data() + static_cast<std::size_t>(j) * sn.width;
      std::uint8_t act = 1;
      for (int i = 0; i < sn.width; ++i) {
        if (w[i] >= kDiscretizeThreshold && !xs[i]) {
          act = 0;
          break;
        }
      }
      out.hidden[s][j] = act;
      out.active[s][j] = act;
      if (act) g += sn.out_weights[j];
    }
    out.subnet_prob[s] = sigmoid(g);
  }
  double z = m.agg_bias;
  for (int s = 0; s < kNumCategories; ++s) z += m.agg_weights[s] * out.subnet_prob[s];
  out.logit = z;
  out.prob = sigmoid(z);
  return out;
}

GraftedModel init_model(const Binarizer& b, int hidden_per_subnet, std::uint64_t seed) {
  if (hidden_per_subnet < 1)
    throw std::invalid_argument("init_model: hidden_per_subnet must be >= 1");
  GraftedModel m;
  m.spans = b.category_spans();
  m.layout_hash = b.layout_hash();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w_init(0.0, 0.5);
  std::uniform_real_distribution<double> small(-0.05, 0.05);
  for (int s = 0; s < kNumCategories; ++s) {
    SubnetParams& sn = m.subnets[s];
    sn.category = static_cast<Category>(s);
    sn.hidden = hidden_per_subnet;
    sn.width = m.spans[s].second;
    sn.weights.resize(static_cast<std::size_t>(sn.hidden) * sn.width);
    for (auto& w : sn.weights) w = w_init(rng);
    sn.out_weights.resize(sn.hidden);
    for (auto& v : sn.out_weights) v = small(rng);
    sn.out_bias = 0.0;
    m.agg_weights[s] = small(rng);
  }
  m.agg_bias = 0.0;
  return m;
}

nlohmann::json GraftedModel::to_json() const {
  nlohmann::json jsubs = nlohmann::json::array();
  for (const auto& sn : subnets) {
    jsubs.push_back({{"category", category_name(sn.category)},
                     {"hidden", sn.hidden},
                     {"width", sn.width},
                     {"weights", sn.weights},
                     {"out_weights", sn.out_weights},
                     {"out_bias", sn.out_bias}});
  }
  nlohmann::json jspans = nlohmann::json::array();
  for (const auto& sp : spans) jspans.push_back({sp.first, sp.second});
  return {{"subnets", jsubs},
          {"agg_weights", agg_weights},
          {"agg_bias", agg_bias},
          {"spans", jspans},
          {"layout_hash", layout_hash}};
}

GraftedModel GraftedModel::from_json(const nlohmann::json& j) {
  GraftedModel m;
  int s = 0;
  for (const auto& js : j.at("subnets")) {
    if (s >= kNumCategories) throw std::runtime_error("model: too many subnets");
    SubnetParams& sn = m.subnets[s];
    sn.category = category_from_string(js.at("category").get<std::string>());
    sn.hidden = js.at("hidden").get<int>();
    sn.width = js.at("width").get<int>();
    sn.weights = js.at("weights").get<std::vector<double>>();
    sn.out_weights = js.at("out_weights").get<std::vector<double>>();
    sn.out_bias = js.at("out_bias").get<double>();
    if (sn.weights.size() != static_cast<std::size_t>(sn.hidden) * sn.width ||
        sn.out_weights.size() != static_cast<std::size_t>(sn.hidden))
      throw std::runtime_error("model: inconsistent subnet dimensions");
    ++s;
  }
  if (s != kNumCategories) throw std::runtime_error("model: expected 3 subnets");
  m.agg_weights = j.at("agg_weights").get<std::array<double, kNumCategories>>();
  m.agg_bias = j.at("agg_bias").get<double>();
  int k = 0;
  for (const auto& jsp : j.at("spans")) {
    m.spans[k] = {jsp.at(0).get<int>(), jsp.at(1).get<int>()};
    ++k;
  }
  m.layout_hash = j.at("layout_hash").get<std::uint64_t>();
  return m;
}

}  // namespace graft
