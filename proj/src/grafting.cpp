#include "graft/grafting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "graft/common.hpp"

namespace graft {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
  if (hidden_per_subnet < 1) throw std::invalid_argument("train: hidden_per_subnet >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size >= 1");
  if (pretrain_epochs < 0 || joint_epochs < 0)
    throw std::invalid_argument("train: epoch counts must be >= 0");
  if (eps <= 0.0) throw std::invalid_argument("train: eps must be > 0");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw std::invalid_argument("train: val_fraction in [0,1)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"hidden_per_subnet", hidden_per_subnet},
          {"batch_size", batch_size},
          {"pretrain_epochs", pretrain_epochs},
          {"joint_epochs", joint_epochs},
          {"seed", seed},
          {"eps", eps},
          {"val_fraction", val_fraction}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.hidden_per_subnet = j.value("hidden_per_subnet", c.hidden_per_subnet);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
  c.joint_epochs = j.value("joint_epochs", c.joint_epochs);
  c.seed = j.value("seed", c.seed);
  c.eps = j.value("eps", c.eps);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.validate();
  return c;
}

double bce_loss(double prob, int label, double eps) {
  const double p = std::min(std::max(prob, eps), 1.0 - eps);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

namespace {

struct Scratch {
  // per subnet, per hidden node
  std::array<std::vector<double>, kNumCategories> act;      // Conj+ activations
  std::array<std::vector<std::uint8_t>, kNumCategories> act_d;
  // gradient accumulators
  std::array<std::vector<double>, kNumCategories> gw;
  std::array<std::vector<double>, kNumCategories> gv;
  std::array<double, kNumCategories> gc{};
  std::array<double, kNumCategories> gu{};
  double gb = 0.0;

  explicit Scratch(const GraftedModel& m) {
    for (int s = 0; s < kNumCategories; ++s) {
      act[s].resize(m.subnets[s].hidden);
      act_d[s].resize(m.subnets[s].hidden);
      gw[s].assign(m.subnets[s].weights.size(), 0.0);
      gv[s].assign(m.subnets[s].out_weights.size(), 0.0);
    }
  }
};

// Continuous subnet forward on one sample, filling activations; returns
// the subnet's pre-sigmoid output.
double subnet_forward_c(const SubnetParams& sn, const std::uint8_t* xs, double eps,
                        std::vector<double>& act) {
  const double log_eps = std::log(eps);
  double g = sn.out_bias;
  for (int j = 0; j < sn.hidden; ++j) {
    const double* w = sn.weights.data() + static_cast<std::size_t>(j) * sn.width;
    double log_conj = 0.0;
    for (int i = 0; i < sn.width; ++i) {
      if (xs[i]) continue;
      const double term = 1.0 - w[i];
      log_conj += term > eps ? std::log(term) : log_eps;
    }
    const double a = -1.0 / (-1.0 + log_conj);
    act[j] = a;
    g += sn.out_weights[j] * a;
  }
  return g;
}

double subnet_forward_d(const SubnetParams& sn, const std::uint8_t* xs,
                        std::vector<std::uint8_t>& act) {
  double g = sn.out_bias;
  for (int j = 0; j < sn.hidden; ++j) {
    const double* w = sn.weights.data() + static_cast<std::size_t>(j) * sn.width;
    std::uint8_t a = 1;
    for (int i = 0; i < sn.width; ++i) {
      if (w[i] >= kDiscretizeThreshold && !xs[i]) {
        a = 0;
        break;
      }
    }
    act[j] = a;
    if (a) g += sn.out_weights[j];
  }
  return g;
}

// dg: gradient arriving at the subnet's pre-sigmoid output.
void subnet_backward(const SubnetParams& sn, const std::uint8_t* xs, double eps,
                     const std::vector<double>& act, double dg, std::vector<double>& gw,
                     std::vector<double>& gv, double& gc) {
  gc += dg;
  for (int j = 0; j < sn.hidden; ++j) {
    const double a = act[j];
    gv[j] += dg * a;
    const double da = dg * sn.out_weights[j];
    if (da == 0.0) continue;
    // dConj+/dlogConj = Conj+^2; dlog(1-w_i)/dw_i = -1/(1-w_i) (clamped terms flat)
    const double f = da * a * a;
    const double* w = sn.weights.data() + static_cast<std::size_t>(j) * sn.width;
    double* g = gw.data() + static_cast<std::size_t>(j) * sn.width;
    for (int i = 0; i < sn.width; ++i) {
      if (xs[i]) continue;
      const double term = 1.0 - w[i];
      if (term > eps) g[i] -= f / term;
    }
  }
}

void clip_weights(SubnetParams& sn) {
  for (auto& w : sn.weights) w = std::min(std::max(w, 0.0), 1.0);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return fnv1a(std::to_string(salt), fnv1a(std::to_string(seed)));
}

}  // namespace

std::pair<double, double> graft_step(GraftedModel& m, const BinarizedData& data,
                                     std::span<const std::size_t> batch, double lr,
                                     double eps, int subnet) {
  if (batch.empty()) throw std::invalid_argument("graft_step: empty batch");
  if (data.width != m.total_width())
    throw std::invalid_argument("graft_step: data width does not match model layout");

  Scratch sc(m);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss_c = 0.0, loss_d = 0.0;

  for (std::size_t idx : batch) {
    const std::uint8_t* x = data.bits.data() + idx * static_cast<std::size_t>(data.width);
    const int y = data.labels[idx];

    if (subnet >= 0) {
      const SubnetParams& sn = m.subnets[subnet];
      const std::uint8_t* xs = x + m.spans[subnet].first;
      const double g_c = subnet_forward_c(sn, xs, eps, sc.act[subnet]);
      const double g_d = subnet_forward_d(sn, xs, sc.act_d[subnet]);
      const double p_c = sigmoid(g_c);
      const double p_d = sigmoid(g_d);
      loss_c += bce_loss(p_c, y, eps);
      loss_d += bce_loss(p_d, y, eps);
      // Grafted upstream: discrete loss sensitivity at the subnet logit.
      const double up = (p_d - static_cast<double>(y)) * inv_b;
      subnet_backward(sn, xs, eps, sc.act[subnet], up, sc.gw[subnet], sc.gv[subnet],
                      sc.gc[subnet]);
      continue;
    }

    std::array<double, kNumCategories> p_c_s, p_d_s;
    double z_c = m.agg_bias, z_d = m.agg_bias;
    for (int s = 0; s < kNumCategories; ++s) {
      const std::uint8_t* xs = x + m.spans[s].first;
      p_c_s[s] = sigmoid(subnet_forward_c(m.subnets[s], xs, eps, sc.act[s]));
      p_d_s[s] = sigmoid(subnet_forward_d(m.subnets[s], xs, sc.act_d[s]));
      z_c += m.agg_weights[s] * p_c_s[s];
      z_d += m.agg_weights[s] * p_d_s[s];
    }
    const double p_c = sigmoid(z_c);
    const double p_d = sigmoid(z_d);
    loss_c += bce_loss(p_c, y, eps);
    loss_d += bce_loss(p_d, y, eps);

    // Grafted upstream at the final logit, chained through the continuous graph.
    const double up = (p_d - static_cast<double>(y)) * inv_b;
    sc.gb += up;
    for (int s = 0; s < kNumCategories; ++s) {
      sc.gu[s] += up * p_c_s[s];
      const double dg = up * m.agg_weights[s] * p_c_s[s] * (1.0 - p_c_s[s]);
      subnet_backward(m.subnets[s], x + m.spans[s].first, eps, sc.act[s], dg, sc.gw[s],
                      sc.gv[s], sc.gc[s]);
    }
  }

  if (subnet >= 0) {
    SubnetParams& sn = m.subnets[subnet];
    for (std::size_t i = 0; i < sn.weights.size(); ++i)
      sn.weights[i] -= lr * sc.gw[subnet][i];
    for (int j = 0; j < sn.hidden; ++j) sn.out_weights[j] -= lr * sc.gv[subnet][j];
    sn.out_bias -= lr * sc.gc[subnet];
    clip_weights(sn);
  } else {
    for (int s = 0; s < kNumCategories; ++s) {
      SubnetParams& sn = m.subnets[s];
      for (std::size_t i = 0; i < sn.weights.size(); ++i)
        sn.weights[i] -= lr * sc.gw[s][i];
      for (int j = 0; j < sn.hidden; ++j) sn.out_weights[j] -= lr * sc.gv[s][j];
      sn.out_bias -= lr * sc.gc[s];
      m.agg_weights[s] -= lr * sc.gu[s];
      clip_weights(sn);
    }
    m.agg_bias -= lr * sc.gb;
  }

  return {loss_c * inv_b, loss_d * inv_b};
}

EpochRecord evaluate_discrete(const GraftedModel& m, const BinarizedData& data,
                              double eps, int subnet) {
  EpochRecord rec;
  std::vector<std::uint8_t> act_d;
  std::vector<double> act_c;
  if (subnet >= 0) {
    act_d.resize(m.subnets[subnet].hidden);
    act_c.resize(m.subnets[subnet].hidden);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    const std::uint8_t* x = data.bits.data() + i * static_cast<std::size_t>(data.width);
    double p_d, p_c;
    if (subnet >= 0) {
      const std::uint8_t* xs = x + m.spans[subnet].first;
      p_d = sigmoid(subnet_forward_d(m.subnets[subnet], xs, act_d));
      p_c = sigmoid(subnet_forward_c(m.subnets[subnet], xs, eps, act_c));
    } else {
      const auto out_d = forward_discrete(m, data.row(i));
      const auto out_c = forward_continuous(m, data.row(i), eps);
      p_d = out_d.prob;
      p_c = out_c.prob;
    }
    rec.loss_d += bce_loss(p_d, data.labels[i], eps);
    rec.loss_c += bce_loss(p_c, data.labels[i], eps);
    if ((p_d >= 0.5 ? 1 : 0) == data.labels[i]) ++correct;
  }
  const double inv_n = data.n ? 1.0 / static_cast<double>(data.n) : 0.0;
  rec.loss_c *= inv_n;
  rec.loss_d *= inv_n;
  rec.acc_d = static_cast<double>(correct) * inv_n;
  return rec;
}

namespace {

BinarizedData subset(const BinarizedData& data, std::span<const std::size_t> idx) {
  BinarizedData out;
  out.width = data.width;
  out.n = idx.size();
  out.bits.resize(out.n * static_cast<std::size_t>(data.width));
  out.labels.resize(out.n);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = data.row(idx[i]);
    std::copy(src.begin(), src.end(),
              out.bits.begin() + i * static_cast<std::size_t>(data.width));
    out.labels[i] = data.labels[idx[i]];
  }
  return out;
}

TrainTrace run_epochs(GraftedModel& m, const BinarizedData& data, const TrainConfig& cfg,
                      int epochs, int subnet, std::mt19937_64& rng) {
  TrainTrace trace;
  std::vector<std::size_t> idx(data.n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double sum_c = 0.0, sum_d = 0.0;
    std::size_t batches = 0;
    for (std::size_t pos = 0; pos < idx.size(); pos += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, idx.size() - pos);
      auto [lc, ld] = graft_step(m, data, {idx.data() + pos, len}, cfg.learning_rate,
                                 cfg.eps, subnet);
      sum_c += lc;
      sum_d += ld;
      ++batches;
    }
    EpochRecord rec;
    rec.loss_c = sum_c / static_cast<double>(batches);
    rec.loss_d = sum_d / static_cast<double>(batches);
    rec.acc_d = evaluate_discrete(m, data, cfg.eps, subnet).acc_d;
    trace.epochs.push_back(rec);
  }
  return trace;
}

}  // namespace

TrainTrace train_subnet(GraftedModel& m, int subnet, const BinarizedData& data,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (subnet < 0 || subnet >= kNumCategories)
    throw std::invalid_argument("train_subnet: bad subnet index");
  if (data.width != m.total_width())
    throw std::invalid_argument("train_subnet: data width does not match model layout");
  std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + subnet));
  return run_epochs(m, data, cfg, cfg.pretrain_epochs, subnet, rng);
}

JointTrainResult train_joint(GraftedModel& m, const BinarizedData& data,
                             const TrainConfig& cfg) {
  cfg.validate();
  if (data.n == 0) throw std::invalid_argument("train_joint: empty dataset");
  JointTrainResult result;

  // Validation holdout for snapshot selection.
  std::vector<std::size_t> idx(data.n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 split_rng(mix_seed(cfg.seed, 7));
  std::shuffle(idx.begin(), idx.end(), split_rng);
  std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(data.n));
  if (n_val >= data.n) n_val = data.n - 1;
  const BinarizedData val =
      n_val ? subset(data, {idx.data(), n_val}) : BinarizedData{};
  const BinarizedData train = subset(data, {idx.data() + n_val, data.n - n_val});
  const BinarizedData& val_set = n_val ? val : train;

  for (int s = 0; s < kNumCategories; ++s)
    result.pretrain[s] = train_subnet(m, s, train, cfg);

  GraftedModel best = m;
  result.best_val_loss = evaluate_discrete(m, val_set, cfg.eps).loss_d;
  result.best_epoch = -1;

  std::mt19937_64 rng(mix_seed(cfg.seed, 2));
  std::vector<std::size_t> order(train.n);
  std::iota(order.begin(), order.end(), 0);
  for (int e = 0; e < cfg.joint_epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum_c = 0.0, sum_d = 0.0;
    std::size_t batches = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += cfg.batch_size) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - pos);
      auto [lc, ld] =
          graft_step(m, train, {order.data() + pos, len}, cfg.learning_rate, cfg.eps);
      sum_c += lc;
      sum_d += ld;
      ++batches;
    }
    EpochRecord rec;
    rec.loss_c = sum_c / static_cast<double>(batches);
    rec.loss_d = sum_d / static_cast<double>(batches);
    rec.acc_d = evaluate_discrete(m, train, cfg.eps).acc_d;
    result.joint.epochs.push_back(rec);

    const double val_loss = evaluate_discrete(m, val_set, cfg.eps).loss_d;
    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = e;
      best = m;
    }
  }
  m = best;
  return result;
}

std::string trace_to_csv(const JointTrainResult& r) {
  std::ostringstream out;
  out << "epoch,loss_c,loss_d,acc_d\n";
  int epoch = 0;
  auto emit = [&](const TrainTrace& t) {
    for (const auto& rec : t.epochs) {
      out << epoch++ << ',' << format_double(rec.loss_c) << ','
          << format_double(rec.loss_d) << ',' << format_double(rec.acc_d) << '\n';
    }
  };
  for (const auto& t : r.pretrain) emit(t);
  emit(r.joint);
  return out.str();
}

}  // namespace graft
