#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "flowspike/loss.hpp"
#include "flowspike/training.hpp"
#include "synthetic.hpp"

using namespace flowspike;

namespace {

ArchConfig tiny_arch() {
  ArchConfig c;
  c.n_in = 6;
  c.base_channels = 2;
  c.n_stages = 2;
  c.recurrency = Recurrency::RF;
  c.neuron_kind = NeuronKind::SNU;
  c.max_flow = 8.0f;
  return c;
}

std::vector<EventWindow> bar20() {
  synthetic::BarParams p;
  p.n_windows = 20;
  p.u = 1.5;
  return synthetic::bar_windows(p);
}

std::vector<float> flat_params(Model& m) {
  std::vector<float> out;
  for (auto& p : m.parameters())
    out.insert(out.end(), p.tensor.value().begin(), p.tensor.value().end());
  return out;
}

std::vector<float> flat_grads(Model& m) {
  std::vector<float> out;
  for (auto& p : m.parameters()) {
    if (p.tensor.has_grad())
      out.insert(out.end(), p.tensor.grad().begin(), p.tensor.grad().end());
    else
      out.insert(out.end(), static_cast<std::size_t>(p.tensor.numel()), 0.0f);
  }
  return out;
}

void zero_grads(Model& m) {
  for (auto& p : m.parameters()) p.tensor.zero_grad();
}

// every cell-state tensor in traversal order
std::vector<Tensor*> state_tensors(Model& m) {
  std::vector<Tensor*> out;
  auto add = [&](SpikingConvT<float>& l) {
    out.push_back(&l.state.s);
    out.push_back(&l.state.y_prev);
    if (l.state.y_tilde_prev.defined()) out.push_back(&l.state.y_tilde_prev);
  };
  add(m.init0);
  add(m.init1);
  for (auto& b : m.enc) {
    add(b.c0);
    add(b.c1);
  }
  for (auto& b : m.dec) {
    add(b.c0);
    add(b.c1);
  }
  return out;
}

Tensor chunk_loss(Model& m, const std::vector<EventWindow>& windows, std::size_t lo,
                  std::size_t hi) {
  Tensor loss;
  for (std::size_t i = lo; i < hi; ++i) {
    auto out = forward(m, encode_for(m, windows[i]));
    Tensor l = total_loss(out.flow, windows[i], 0.001f);
    loss = loss.defined() ? add(loss, l) : l;
  }
  return loss;
}

}  // namespace

TEST_CASE("adam first step moves by ~lr in the gradient direction") {
  Tensor p = Tensor::from_data(Shape{1}, {1.0f});
  p.set_requires_grad(true);
  TrainConfig cfg;
  cfg.learning_rate = 0.01f;
  AdamOpt opt({{"p", p}}, cfg);
  p.grad_mut()[0] = 0.37f;
  opt.step();
  CHECK(p.at(0) == doctest::Approx(1.0f - 0.01f).epsilon(1e-5));
  CHECK_FALSE(p.has_grad());  // grads cleared

  // negative gradient moves the other way
  Tensor q = Tensor::from_data(Shape{1}, {1.0f});
  q.set_requires_grad(true);
  AdamOpt opt2({{"q", q}}, cfg);
  q.grad_mut()[0] = -2.5f;
  opt2.step();
  CHECK(q.at(0) == doctest::Approx(1.0f + 0.01f).epsilon(1e-5));
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Tensor p = Tensor::from_data(Shape{2}, {0.5f, -0.5f});
  p.set_requires_grad(true);
  TrainConfig cfg;
  AdamOpt opt({{"p", p}}, cfg);
  opt.step();
  CHECK(p.at(0) == 0.5f);
  CHECK(p.at(1) == -0.5f);
}

TEST_CASE("adam moments decay geometrically") {
  Tensor p = Tensor::from_data(Shape{1}, {0.0f});
  p.set_requires_grad(true);
  TrainConfig cfg;
  AdamOpt opt({{"p", p}}, cfg);
  p.grad_mut()[0] = 1.0f;
  opt.step();
  float m1 = opt.m()[0][0], v1 = opt.v()[0][0];
  CHECK(m1 == doctest::Approx(0.1f));    // (1-beta1) * g
  CHECK(v1 == doctest::Approx(0.001f));  // (1-beta2) * g^2
  opt.step();                            // zero grad now
  CHECK(opt.m()[0][0] == doctest::Approx(0.9f * m1));
  CHECK(opt.v()[0][0] == doctest::Approx(0.999f * v1));
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  Model m = build<float>(tiny_arch(), 16, 16, 42);
  auto before = flat_params(m);
  TrainConfig cfg;
  cfg.learning_rate = 0.0f;
  cfg.epochs = 1;
  cfg.tbptt_interval = 5;
  train_sequence(m, bar20(), cfg);
  CHECK(flat_params(m) == before);
}

TEST_CASE("tbptt_interval=1 degenerates to per-step updates") {
  Model m = build<float>(tiny_arch(), 16, 16, 42);
  TrainConfig cfg;
  cfg.tbptt_interval = 1;
  cfg.epochs = 1;
  auto log = train_sequence(m, bar20(), cfg);
  CHECK(log.size() == 20);  // one chunk per window
  for (const auto& e : log) CHECK(std::isfinite(e.loss));
}

TEST_CASE("training is reproducible bit-for-bit") {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.tbptt_interval = 10;
  cfg.learning_rate = 1e-3f;
  auto windows = bar20();

  Model m1 = build<float>(tiny_arch(), 16, 16, 7);
  auto log1 = train_sequence(m1, windows, cfg);
  Model m2 = build<float>(tiny_arch(), 16, 16, 7);
  auto log2 = train_sequence(m2, windows, cfg);

  CHECK(flat_params(m1) == flat_params(m2));
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) CHECK(log1[i].loss == log2[i].loss);
}

TEST_CASE("extent mismatch is rejected before any step") {
  Model m = build<float>(tiny_arch(), 16, 16, 1);
  auto before = flat_params(m);
  synthetic::BarParams p;
  p.width = 32;
  p.height = 32;
  p.n_windows = 3;
  auto wrong = synthetic::bar_windows(p);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_sequence(m, wrong, cfg), validation_error);
  CHECK(flat_params(m) == before);
}

TEST_CASE("no gradient flows across chunk boundaries") {
  auto windows = bar20();
  const std::size_t B = 10;  // boundary after chunk 1

  // Run A: two chunks with the production sequence of operations
  Model a = build<float>(tiny_arch(), 16, 16, 13);
  reset_states(a);
  backward(chunk_loss(a, windows, 0, B));
  zero_grads(a);
  detach_states(a);
  // snapshot boundary state values
  std::vector<std::vector<float>> snap;
  for (Tensor* t : state_tensors(a)) snap.emplace_back(t->value().begin(), t->value().end());
  backward(chunk_loss(a, windows, B, 2 * B));
  auto g_a = flat_grads(a);

  // Run B: fresh model (same seed -> same weights), chunk 1 REPLACED by a
  // different event sequence, then the boundary state values injected.
  synthetic::BarParams mut;
  mut.n_windows = 10;
  mut.u = 0.7;  // mutated earlier chunk
  mut.x0 = 9.6;
  Model b = build<float>(tiny_arch(), 16, 16, 13);
  reset_states(b);
  backward(chunk_loss(b, synthetic::bar_windows(mut), 0, B));
  zero_grads(b);
  detach_states(b);
  auto states_b = state_tensors(b);
  REQUIRE(states_b.size() == snap.size());
  for (std::size_t i = 0; i < states_b.size(); ++i) {
    auto dst = states_b[i]->value_mut();
    REQUIRE(dst.size() == snap[i].size());
    std::copy(snap[i].begin(), snap[i].end(), dst.begin());
  }
  backward(chunk_loss(b, windows, B, 2 * B));
  auto g_b = flat_grads(b);

  // identical boundary values + identical chunk-2 inputs => identical grads,
  // bit for bit, iff nothing from chunk 1 leaks through the graph
  CHECK(g_a == g_b);
}

TEST_CASE("loss CSV log") {
  std::vector<ChunkLog> log = {{0, 1.5f, 0.7f, 0.6f, 0.2f}, {1, 1.2f, 0.6f, 0.5f, 0.1f}};
  std::string path = "/tmp/flowspike_losslog_test.csv";
  write_loss_csv(log, path);
  std::ifstream f(path);
  std::string header, row0;
  std::getline(f, header);
  std::getline(f, row0);
  CHECK(header == "chunk_index,loss,contrast_fw,contrast_bw,smooth");
  CHECK(row0.substr(0, 2) == "0,");
  std::remove(path.c_str());
}

TEST_CASE("training config JSON") {
  auto cfg = train_config_from_json_string(
      R"({"tbptt_interval": 4, "learning_rate": 0.01, "lambda": 0.002, "epochs": 3, "seed": 9, "multi_res": true})");
  CHECK(cfg.tbptt_interval == 4);
  CHECK(cfg.learning_rate == doctest::Approx(0.01f));
  CHECK(cfg.lambda == doctest::Approx(0.002f));
  CHECK(cfg.epochs == 3);
  CHECK(cfg.seed == 9);
  CHECK(cfg.multi_res);

  CHECK_THROWS_AS(train_config_from_json_string("{nope"), validation_error);
  CHECK_THROWS_AS(train_config_from_json_string(R"({"tbptt_interval": 0})"), validation_error);
}
