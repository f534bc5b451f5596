#include "ssp/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "ssp/errors.hpp"
#include "ssp/rng.hpp"

namespace ssp {

namespace {

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;
  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;
};

void adam_step(std::vector<float*>& params, std::vector<float*>& grads,
               AdamState& st, double lr, double weight_decay) {
  ++st.t;
  double bc1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(st.t));
  double bc2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    double g = static_cast<double>(*grads[i]) +
               weight_decay * static_cast<double>(*params[i]);
    st.m[i] = AdamState::beta1 * st.m[i] + (1.0 - AdamState::beta1) * g;
    st.v[i] = AdamState::beta2 * st.v[i] + (1.0 - AdamState::beta2) * g * g;
    double step = lr * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + AdamState::eps);
    *params[i] = static_cast<float>(static_cast<double>(*params[i]) - step);
  }
}

}  // namespace

TrainResult train_stream(const ToyBackbone& init_model,
                         const std::vector<StreamSample<float>>& samples,
                         int num_classes, const TrainConfig& cfg, Stream stream) {
  if (num_classes < 1)
    throw std::invalid_argument("train_stream: need at least one class");
  if (cfg.learning_rate <= 0 || cfg.lr_decay_factor <= 0 || cfg.lr_decay_every <= 0)
    throw std::invalid_argument("train_stream: rates must be positive");
  if (cfg.batch_people < 2 || cfg.images_per_person < 2)
    throw std::invalid_argument("train_stream: need P >= 2 and N >= 2");
  if (cfg.epochs < 0) throw std::invalid_argument("train_stream: negative epochs");
  if (samples.empty()) throw std::invalid_argument("train_stream: no samples");

  std::vector<std::vector<int>> by_class(num_classes);
  for (size_t i = 0; i < samples.size(); ++i) {
    int label = samples[i].label;
    if (label < 0 || label >= num_classes)
      throw std::invalid_argument("train_stream: label out of range");
    by_class[label].push_back(static_cast<int>(i));
  }
  std::vector<int> class_ids;
  for (int c = 0; c < num_classes; ++c)
    if (!by_class[c].empty()) class_ids.push_back(c);
  if (class_ids.size() < 2)
    throw std::invalid_argument("train_stream: need samples from >= 2 classes");

  TrainResult result;
  result.model = init_model;
  Rng rng(cfg.seed);
  Rng init_rng = rng.fork(0xC1A551F1);
  attach_classifier(result.model, num_classes, stream, init_rng);

  const int people = std::min<int>(cfg.batch_people,
                                   static_cast<int>(class_ids.size()));
  const int per_person = cfg.images_per_person;
  const int batches_per_epoch =
      (static_cast<int>(class_ids.size()) + people - 1) / people;

  auto params = param_ptrs(result.model);
  AdamState adam;
  adam.m.assign(params.size(), 0.0);
  adam.v.assign(params.size(), 0.0);

  Rng sample_rng = rng.fork(0x5A3B1E);
  std::vector<int> order = class_ids;
  size_t cursor = order.size();  // forces a shuffle before the first batch

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.learning_rate *
                std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every);
    double crosse_sum = 0.0, trip_sum = 0.0;

    for (int b = 0; b < batches_per_epoch; ++b) {
      std::vector<const StreamSample<float>*> batch;
      batch.reserve(static_cast<size_t>(people) * per_person);
      for (int p = 0; p < people; ++p) {
        if (cursor >= order.size()) {
          sample_rng.shuffle(order);
          cursor = 0;
        }
        int cls = order[cursor++];
        std::vector<int> pool = by_class[cls];
        sample_rng.shuffle(pool);
        for (int n = 0; n < per_person; ++n)
          batch.push_back(&samples[pool[n % pool.size()]]);
      }

      ToyBackbone grads = zeros_like(result.model);
      auto parts = stream_batch_loss<float>(
          result.model, batch, people, per_person, stream,
          static_cast<float>(cfg.epsilon), static_cast<float>(cfg.margin),
          cfg.loss_mode == LossMode::cross_plus_triplet, &grads, cfg.threads);

      if (!std::isfinite(parts.total)) {
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "non-finite loss at epoch %d batch %d: crosse=%g trip=%g",
                      epoch, b, static_cast<double>(parts.crosse),
                      static_cast<double>(parts.trip));
        throw training_error(msg);
      }
      crosse_sum += parts.crosse;
      trip_sum += parts.trip;

      auto grad_ptrs = param_ptrs(grads);
      adam_step(params, grad_ptrs, adam, lr, cfg.weight_decay);
    }

    result.curve.push_back({epoch, crosse_sum / batches_per_epoch,
                            trip_sum / batches_per_epoch, lr});
  }
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve,
                    LossMode mode) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  bool with_trip = mode == LossMode::cross_plus_triplet;
  out << (with_trip ? "epoch,crosse,trip,lr\n" : "epoch,crosse,lr\n");
  char line[160];
  for (const auto& e : curve) {
    if (with_trip)
      std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.crosse,
                    e.trip, e.lr);
    else
      std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", e.epoch, e.crosse, e.lr);
    out << line;
  }
  if (!out) throw format_error(path + ": write failed");
}

}  // namespace ssp
