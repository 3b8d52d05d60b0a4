#include "flowspike/training.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "flowspike/loss.hpp"

namespace flowspike {

TrainConfig train_config_from_json_string(const std::string& json) {
  TrainConfig c;
  try {
    nlohmann::json j = nlohmann::json::parse(json);
    if (j.contains("tbptt_interval")) c.tbptt_interval = j["tbptt_interval"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<float>();
    if (j.contains("lambda")) c.lambda = j["lambda"].get<float>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("multi_res")) c.multi_res = j["multi_res"].get<bool>();
    if (j.contains("beta1")) c.beta1 = j["beta1"].get<float>();
    if (j.contains("beta2")) c.beta2 = j["beta2"].get<float>();
    if (j.contains("adam_eps")) c.adam_eps = j["adam_eps"].get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("invalid training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig train_config_from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open training config '" + path + "'");
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return train_config_from_json_string(s);
}

AdamOpt::AdamOpt(std::vector<NamedParam<float>> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      lr_(cfg.learning_rate),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.adam_eps) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<std::size_t>(params_[i].tensor.numel()), 0.0f);
    v_[i].assign(static_cast<std::size_t>(params_[i].tensor.numel()), 0.0f);
  }
}

void AdamOpt::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].tensor;
    auto x = p.value_mut();
    const bool has = p.has_grad();
    auto g = has ? p.grad() : std::span<const float>{};
    for (std::size_t k = 0; k < x.size(); ++k) {
      float gk = has ? g[k] : 0.0f;
      m_[i][k] = beta1_ * m_[i][k] + (1.0f - beta1_) * gk;
      v_[i][k] = beta2_ * v_[i][k] + (1.0f - beta2_) * gk * gk;
      float mhat = m_[i][k] / bc1;
      float vhat = v_[i][k] / bc2;
      x[k] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    p.zero_grad();
  }
}

Tensor encode_for(const Model& model, const EventWindow& w) {
  if (model.config.n_in == 2) return count_encode(w);
  return voxel_encode(w, model.config.n_in);
}

std::vector<ChunkLog> train_sequence(Model& model, const std::vector<EventWindow>& windows,
                                     const TrainConfig& cfg) {
  cfg.validate();
  for (const EventWindow& w : windows)
    if (w.width != model.width || w.height != model.height)
      throw validation_error("train_sequence: window extent " + std::to_string(w.width) + "x" +
                             std::to_string(w.height) + " does not match model " +
                             std::to_string(model.width) + "x" + std::to_string(model.height));

  AdamOpt opt(model.parameters(), cfg);
  std::vector<ChunkLog> log;
  int chunk_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    reset_states(model);
    std::size_t i = 0;
    while (i < windows.size()) {
      const std::size_t n = std::min<std::size_t>(cfg.tbptt_interval, windows.size() - i);
      Tensor chunk_loss;
      ChunkLog entry;
      entry.chunk_index = chunk_index++;
      for (std::size_t k = 0; k < n; ++k) {
        const EventWindow& w = windows[i + k];
        auto out = forward(model, encode_for(model, w));
        std::vector<Tensor> flows;
        if (cfg.multi_res) flows = out.intermediates;
        flows.push_back(out.flow);
        for (const Tensor& flow : flows) {
          Tensor cfw = contrast_term(flow, w, WarpRef::End);
          Tensor cbw = contrast_term(flow, w, WarpRef::Start);
          Tensor sm = charbonnier_smoothness(flow);
          entry.contrast_fw += cfw.item();
          entry.contrast_bw += cbw.item();
          entry.smooth += sm.item();
          Tensor l = add(add(cfw, cbw), scale(sm, cfg.lambda));
          chunk_loss = chunk_loss.defined() ? add(chunk_loss, l) : l;
        }
      }
      entry.loss = chunk_loss.item() / static_cast<float>(n);
      entry.contrast_fw /= static_cast<float>(n);
      entry.contrast_bw /= static_cast<float>(n);
      entry.smooth /= static_cast<float>(n);
      backward(chunk_loss);
      opt.step();
      detach_states(model);
      log.push_back(entry);
      i += n;
    }
  }
  return log;
}

void write_loss_csv(const std::vector<ChunkLog>& log, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f << "chunk_index,loss,contrast_fw,contrast_bw,smooth\n";
  for (const ChunkLog& e : log)
    f << e.chunk_index << ',' << e.loss << ',' << e.contrast_fw << ',' << e.contrast_bw << ','
      << e.smooth << '\n';
  if (!f) throw io_error("failed writing '" + path + "'");
}

}  // namespace flowspike
