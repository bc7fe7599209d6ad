#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/icp.hpp"
#include "core/loss.hpp"
#include "core/net.hpp"

namespace chartloc {

struct TrainConfig {
  int epochs = 40;
  int pairs_per_epoch = 5000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  // Cosine decay from learning_rate to final_lr_fraction * learning_rate
  // over the whole run; 1.0 keeps the rate constant.
  double final_lr_fraction = 0.1;
  std::uint64_t seed = 1;
  double lambda_value = 5.0;  // laser weight inside the window
  int lambda_window = 500;    // |n_c - n_f| <= window, else lambda = 0
  LossVariant variant = LossVariant::split_toa;
  double hinge_margin = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  IcpConfig icp;
  std::size_t threads = 0;  // 0 -> CHARTLOC_THREADS / hardware

  void validate() const;
};

struct TrainResult {
  ChartNetF model;
  std::vector<double> batch_loss;  // mean pair loss per optimizer step
  std::vector<double> epoch_loss;  // mean over the epoch's steps
};

LossVariant loss_variant_from_name(const std::string& name);
const char* loss_variant_name(LossVariant variant);

// Mini-batched Adam over uniformly sampled step pairs. The laser term gets
// lambda = lambda_value * icp_quality inside the window and 0 outside.
// Deterministic for a fixed config and seed, independent of thread count.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

}  // namespace chartloc
