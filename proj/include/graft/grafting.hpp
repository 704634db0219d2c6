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

struct TrainConfig {
  double learning_rate = 0.1;
  int hidden_per_subnet = 32;
  // Small batches matter: with plain SGD the output layers start near zero
  // and need many steps per epoch to grow past the discretization threshold.
  int batch_size = 32;
  int pretrain_epochs = 30;
  int joint_epochs = 60;
  std::uint64_t seed = 0;
  double eps = kDefaultEps;
  double val_fraction = 0.1;  // holdout for best-snapshot selection

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

double bce_loss(double prob, int label, double eps = kDefaultEps);

struct EpochRecord {
  double loss_c = 0.0;
  double loss_d = 0.0;
  double acc_d = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
};

// One grafted mini-batch step: the update direction is the discrete
// model's loss sensitivity at the final logit (p_d - y), backpropagated
// through the continuous computation graph. Hidden weights are clipped to
// [0,1] afterwards. subnet = -1 trains all parameters against the final
// output; subnet in [0,3) trains only that subnet against its own head.
// Returns (mean continuous loss, mean discrete loss) over the batch.
std::pair<double, double> graft_step(GraftedModel& m, const BinarizedData& data,
                                     std::span<const std::size_t> batch, double lr,
                                     double eps, int subnet = -1);

// Pretrains one subnet with the others frozen; cfg.pretrain_epochs epochs.
TrainTrace train_subnet(GraftedModel& m, int subnet, const BinarizedData& data,
                        const TrainConfig& cfg);

struct JointTrainResult {
  std::array<TrainTrace, kNumCategories> pretrain;
  TrainTrace joint;
  int best_epoch = -1;  // joint epoch of the returned snapshot
  double best_val_loss = 0.0;
};

// Subnet pretraining followed by joint training; returns via `m` the
// parameter snapshot with the best discrete validation loss.
JointTrainResult train_joint(GraftedModel& m, const BinarizedData& data,
                             const TrainConfig& cfg);

// Discrete-pass metrics over a whole dataset (subnet = -1: final output).
EpochRecord evaluate_discrete(const GraftedModel& m, const BinarizedData& data,
                              double eps, int subnet = -1);

std::string trace_to_csv(const JointTrainResult& r);

}  // namespace graft
