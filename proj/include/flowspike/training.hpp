#pragma once

// TBPTT training over event-window sequences: forward tbptt_interval windows,
// accumulate the self-supervised loss, backward once, adaptive-moment step,
// detach states. States reset at each sequence (epoch) start.

#include <cstdint>
#include <string>
#include <vector>

#include "flowspike/encoding.hpp"
#include "flowspike/network.hpp"

namespace flowspike {

struct TrainConfig {
  int tbptt_interval = 10;
  float learning_rate = 1e-4f;
  float lambda = 0.001f;
  int epochs = 1;
  std::uint64_t seed = 1;
  bool multi_res = false;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;

  void validate() const {
    if (tbptt_interval < 1) throw validation_error("train: tbptt_interval must be >= 1");
    if (!(learning_rate >= 0)) throw validation_error("train: learning_rate must be >= 0");
    if (epochs < 1) throw validation_error("train: epochs must be >= 1");
  }
};

TrainConfig train_config_from_json_string(const std::string& json);
TrainConfig train_config_from_json_file(const std::string& path);

struct ChunkLog {
  int chunk_index = 0;
  float loss = 0;  // per-window means over the chunk
  float contrast_fw = 0;
  float contrast_bw = 0;
  float smooth = 0;
};

// Adaptive-moment optimizer over a fixed parameter list. step() consumes and
// clears the gradients.
class AdamOpt {
 public:
  AdamOpt(std::vector<NamedParam<float>> params, const TrainConfig& cfg);

  void step();
  std::int64_t steps_taken() const { return t_; }

  // first/second moment buffers, exposed for inspection
  const std::vector<std::vector<float>>& m() const { return m_; }
  const std::vector<std::vector<float>>& v() const { return v_; }

 private:
  std::vector<NamedParam<float>> params_;
  std::vector<std::vector<float>> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Encode a window to the model's input coding: 2-channel models use count
// encoding, wider models a voxel grid with n_in bins.
Tensor encode_for(const Model& model, const EventWindow& w);

std::vector<ChunkLog> train_sequence(Model& model, const std::vector<EventWindow>& windows,
                                     const TrainConfig& cfg);

void write_loss_csv(const std::vector<ChunkLog>& log, const std::string& path);

}  // namespace flowspike
