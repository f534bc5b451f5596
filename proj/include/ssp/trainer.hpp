#pragma once

#include <cstdint>
#include <vector>

#include "ssp/backbone.hpp"
#include "ssp/stream_loss.hpp"

namespace ssp {

enum class LossMode { cross_only, cross_plus_triplet };

struct TrainConfig {
  double learning_rate = 3e-4;
  double weight_decay = 5e-4;
  double lr_decay_factor = 0.1;
  int lr_decay_every = 60;  // epochs
  int epochs = 180;
  int batch_people = 8;       // P
  int images_per_person = 4;  // N; P*N is the batch size
  double epsilon = 0.1;       // LSR
  double margin = 0.3;        // triplet
  LossMode loss_mode = LossMode::cross_plus_triplet;
  uint64_t seed = 1;
  int threads = 1;
};

struct EpochStats {
  int epoch = 0;
  double crosse = 0.0;
  double trip = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ToyBackbone model;
  std::vector<EpochStats> curve;
};

/// Trains one stream with Adam (standard moment defaults, the configured
/// learning-rate schedule, L2 weight decay folded into the gradient).
/// A fresh classification layer over num_classes identities is attached to
/// the model before the first step; samples carry labels in [0, num_classes).
/// Batches are P identities x N images, resampled per epoch from the config
/// seed. Aborts with training_error if the loss turns non-finite.
TrainResult train_stream(const ToyBackbone& init_model,
                         const std::vector<StreamSample<float>>& samples,
                         int num_classes, const TrainConfig& cfg, Stream stream);

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve,
                    LossMode mode);

}  // namespace ssp
