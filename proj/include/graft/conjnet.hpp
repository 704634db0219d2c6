#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "graft/binarizer.hpp"
#include "graft/dataset.hpp"

namespace graft {

inline constexpr double kDefaultEps = 1e-12;
inline constexpr double kDiscretizeThreshold = 0.5;

// Conj(w, x) = prod_i (1 - w_i (1 - x_i)); logical AND at binary weights.
double conj_activation(std::span<const double> w, std::span<const std::uint8_t> x);

// Conj+(w, x) = -1 / (-1 + log Conj), evaluated in the log domain with
// per-term clamping at eps. Output in (0, 1], fixes 1.
double conj_plus_activation(std::span<const double> w, std::span<const std::uint8_t> x,
                            double eps = kDefaultEps);

// dConj/dw_k = (x_k - 1) * prod_{i != k} (1 - w_i (1 - x_i))
double conj_gradient(std::span<const double> w, std::span<const std::uint8_t> x,
                     std::size_t k);

std::vector<std::uint8_t> discretize(std::span<const double> w,
                                     double threshold = kDiscretizeThreshold);

struct SubnetParams {
  Category category;
  int hidden = 0;
  int width = 0;
  std::vector<double> weights;  // row-major hidden x width, each in [0,1]
  std::vector<double> out_weights;
  double out_bias = 0.0;

  std::span<const double> node(int j) const {
    return {weights.data() + static_cast<std::size_t>(j) * width,
            static_cast<std::size_t>(width)};
  }
};

struct GraftedModel {
  std::array<SubnetParams, kNumCategories> subnets;
  std::array<double, kNumCategories> agg_weights{};
  double agg_bias = 0.0;
  std::array<std::pair<int, int>, kNumCategories> spans{};  // bit (offset, width)
  std::uint64_t layout_hash = 0;

  int total_width() const;

  nlohmann::json to_json() const;
  static GraftedModel from_json(const nlohmann::json& j);
};

struct NetworkOutputs {
  std::array<std::vector<double>, kNumCategories> hidden;
  std::array<std::vector<std::uint8_t>, kNumCategories> active;  // discrete pass only
  std::array<double, kNumCategories> subnet_prob{};
  double logit = 0.0;
  double prob = 0.0;
};

// Continuous pass: Conj+ activations on the real-valued weights.
NetworkOutputs forward_continuous(const GraftedModel& m, std::span<const std::uint8_t> x,
                                  double eps = kDefaultEps);

// Discrete pass: exact Boolean conjunctions on weights thresholded at 0.5;
// output layers shared with the continuous view.
NetworkOutputs forward_discrete(const GraftedModel& m, std::span<const std::uint8_t> x);

// Hidden weights uniform in [0, 0.5) so the initial discrete rules are all
// empty; output layers near zero. Deterministic per seed.
GraftedModel init_model(const Binarizer& b, int hidden_per_subnet, std::uint64_t seed);

}  // namespace graft
