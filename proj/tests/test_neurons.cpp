#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowspike/neurons.hpp"
#include "oracle.hpp"

using namespace flowspike;

namespace {

// 1x1x1 cell helpers: effective decay d is set through d_raw = logit(d).
template <typename S>
NeuronParamsT<S> cell_params(double d, double v_th, NeuronKind kind) {
  NeuronParamsT<S> p;
  p.kind = kind;
  double d_raw = d <= 0 ? -40.0 : std::log(d / (1.0 - d));
  p.d_raw = TensorT<S>::from_data(Shape{1}, {static_cast<S>(d_raw)});
  p.v_th = TensorT<S>::from_data(Shape{1}, {static_cast<S>(v_th)});
  p.d_raw.set_requires_grad(true);
  p.v_th.set_requires_grad(true);
  return p;
}

template <typename S>
TensorT<S> one(double v) {
  return TensorT<S>::from_data(Shape{1, 1, 1}, {static_cast<S>(v)});
}

template <typename S>
CellStateT<S> state_with(double s, double y, NeuronKind kind) {
  CellStateT<S> st = CellStateT<S>::zeros(1, 1, 1, kind);
  st.s.value_mut()[0] = static_cast<S>(s);
  st.y_prev.value_mut()[0] = static_cast<S>(y);
  if (kind == NeuronKind::SNUo) st.y_tilde_prev.value_mut()[0] = static_cast<S>(y);
  return st;
}

}  // namespace

TEST_CASE("snu_step follows the state equation") {
  // d=0: no decay path, s = drive
  {
    auto p = cell_params<float>(0.0, 1.0, NeuronKind::SNU);
    auto st = CellStateT<float>::zeros(1, 1, 1, NeuronKind::SNU);
    auto [y, next] = snu_step(one<float>(1.2), TensorT<float>(), st, p);
    CHECK(next.s.at(0) == doctest::Approx(1.2f));
    CHECK(y.at(0) == 1.0f);
  }
  // reset term kills the carryover when y_prev = 1
  {
    auto p = cell_params<float>(0.5, 1.0, NeuronKind::SNU);
    auto st = state_with<float>(2.0, 1.0, NeuronKind::SNU);
    auto [y, next] = snu_step(one<float>(1.0), TensorT<float>(), st, p);
    CHECK(next.s.at(0) == doctest::Approx(0.5f));
    CHECK(y.at(0) == 0.0f);
  }
  // decay-only path
  {
    auto p = cell_params<float>(0.5, 0.9, NeuronKind::SNU);
    auto st = state_with<float>(2.0, 0.0, NeuronKind::SNU);
    auto [y, next] = snu_step(one<float>(0.0), TensorT<float>(), st, p);
    CHECK(next.s.at(0) == doctest::Approx(1.0f));
    CHECK(y.at(0) == 1.0f);
  }
  // shape mismatch
  {
    auto p = cell_params<float>(0.5, 1.0, NeuronKind::SNU);
    auto st = CellStateT<float>::zeros(1, 2, 2, NeuronKind::SNU);
    CHECK_THROWS_AS(snu_step(one<float>(0.0), TensorT<float>(), st, p), shape_error);
  }
}

TEST_CASE("snuo_step modulation") {
  // all-zero input and state, v_th = -0.1 -> y~ = 1, y = sigmoid(0) = 0.5
  {
    auto p = cell_params<float>(0.9, -0.1, NeuronKind::SNUo);
    auto st = CellStateT<float>::zeros(1, 1, 1, NeuronKind::SNUo);
    auto [y, next] = snuo_step(one<float>(0.0), TensorT<float>(), one<float>(0.0),
                               TensorT<float>(), st, p);
    CHECK(next.y_tilde_prev.at(0) == 1.0f);
    CHECK(y.at(0) == doctest::Approx(0.5f));
  }
  // y~ = 0 gates the output to 0 regardless of modulation
  {
    auto p = cell_params<float>(0.9, 5.0, NeuronKind::SNUo);
    auto st = CellStateT<float>::zeros(1, 1, 1, NeuronKind::SNUo);
    auto [y, next] = snuo_step(one<float>(1.0), TensorT<float>(), one<float>(3.0),
                               TensorT<float>(), st, p);
    CHECK(next.y_tilde_prev.at(0) == 0.0f);
    CHECK(y.at(0) == 0.0f);
  }
  // d=0, drive=-1 -> s = leaky_relu(-1) = -0.1
  {
    auto p = cell_params<float>(0.0, 0.5, NeuronKind::SNUo);
    auto st = CellStateT<float>::zeros(1, 1, 1, NeuronKind::SNUo);
    auto [y, next] = snuo_step(one<float>(-1.0), TensorT<float>(), one<float>(0.0),
                               TensorT<float>(), st, p);
    CHECK(next.s.at(0) == doctest::Approx(-0.1f));
    CHECK(y.at(0) == 0.0f);
  }
  // outputs live in [0,1]
  {
    Rng rng(12);
    auto p = NeuronParamsT<float>::init(2, NeuronKind::SNUo);
    auto st = CellStateT<float>::zeros(2, 3, 3, NeuronKind::SNUo);
    for (int t = 0; t < 3; ++t) {
      Tensor drive = Tensor::uniform(Shape{2, 3, 3}, -2, 2, rng);
      Tensor mod = Tensor::uniform(Shape{2, 3, 3}, -2, 2, rng);
      auto [y, next] = snuo_step(drive, TensorT<float>(), mod, TensorT<float>(), st, p);
      st = next;
      for (float v : y.value()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
      for (float v : next.y_tilde_prev.value()) CHECK((v == 0.0f || v == 1.0f));
    }
  }
}

TEST_CASE("ssnu_step sigmoid output") {
  auto p = cell_params<float>(0.0, 1.0, NeuronKind::sSNU);
  auto st = CellStateT<float>::zeros(1, 1, 1, NeuronKind::sSNU);
  auto [y, next] = ssnu_step(one<float>(1.0), TensorT<float>(), st, p);
  CHECK(y.at(0) == doctest::Approx(0.5f));  // s - v_th = 0

  auto [y2, next2] = ssnu_step(one<float>(12.0), TensorT<float>(), next, p);
  CHECK(y2.at(0) == doctest::Approx(1.0f).epsilon(1e-4));  // sigmoid saturation
  CHECK(y2.at(0) > 0.0f);
}

TEST_CASE("reset_state zeroes, preserves shape, idempotent") {
  auto st = state_with<float>(2.0, 1.0, NeuronKind::SNU);
  auto r1 = reset_state(st);
  CHECK(r1.s.at(0) == 0.0f);
  CHECK(r1.y_prev.at(0) == 0.0f);
  CHECK(r1.s.shape() == st.s.shape());
  auto r2 = reset_state(r1);
  CHECK(r2.s.at(0) == 0.0f);

  // reset then step with zero drive: y = step(-v_th)
  auto p = cell_params<float>(0.5, -0.2, NeuronKind::SNU);
  auto [y, n1] = snu_step(one<float>(0.0), TensorT<float>(), r1, p);
  CHECK(y.at(0) == 1.0f);
  auto p2 = cell_params<float>(0.5, 0.2, NeuronKind::SNU);
  auto [y2, n2] = snu_step(one<float>(0.0), TensorT<float>(), r1, p2);
  CHECK(y2.at(0) == 0.0f);
}

TEST_CASE("decay mapping stays inside (0,1)") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    float d_raw = rng.uniformf(-15.0f, 15.0f);
    Tensor t = Tensor::from_data(Shape{1}, {d_raw});
    Tensor d = sigmoid(t);
    CHECK(d.at(0) > 0.0f);
    CHECK(d.at(0) < 1.0f);
  }
}

TEST_CASE("binary cells emit exactly binary outputs; spikes gate the carryover") {
  Rng rng(9);
  auto p = NeuronParamsT<float>::init(3, NeuronKind::SNU);
  auto st = CellStateT<float>::zeros(3, 4, 4, NeuronKind::SNU);
  for (int step = 0; step < 4; ++step) {
    Tensor drive = Tensor::uniform(Shape{3, 4, 4}, -2.0f, 2.0f, rng);
    auto [y, next] = snu_step(drive, TensorT<float>(), st, p);
    for (float v : y.value()) CHECK((v == 0.0f || v == 1.0f));
    st = next;
  }

  // with y_prev = 1 the carry term d * s * (1 - y) is exactly zero
  auto ones_state = state_with<float>(7.5, 1.0, NeuronKind::SNU);
  auto params = cell_params<float>(0.75, 10.0, NeuronKind::SNU);
  auto [y, next] = snu_step(one<float>(0.0), TensorT<float>(), ones_state, params);
  CHECK(next.s.at(0) == 0.0f);
}

TEST_CASE("sSNU end-to-end BPTT gradients match finite differences over 3 steps") {
  using D = double;
  Rng rng(77);
  auto p = cell_params<D>(0.6, 0.4, NeuronKind::sSNU);

  std::vector<TensorT<D>> drives;
  for (int t = 0; t < 3; ++t) {
    auto d = TensorT<D>::uniform(Shape{1, 2, 2}, -1.0, 1.0, rng);
    d.set_requires_grad(true);
    drives.push_back(d);
  }
  std::vector<double> weights;
  for (int i = 0; i < 12; ++i) weights.push_back(rng.uniform(-1, 1));

  auto run = [&]() -> TensorT<D> {
    auto st = CellStateT<D>::zeros(1, 2, 2, NeuronKind::sSNU);
    TensorT<D> loss;
    int wi = 0;
    for (int t = 0; t < 3; ++t) {
      auto [y, next] = ssnu_step(drives[t], TensorT<D>(), st, p);
      st = next;
      std::vector<D> wv(4);
      for (int i = 0; i < 4; ++i) wv[i] = weights[wi++];
      auto term = sum_all(mul(y, TensorT<D>::from_data(Shape{1, 2, 2}, std::move(wv))));
      loss = loss.defined() ? add(loss, term) : term;
    }
    return loss;
  };

  backward(run());

  for (int t = 0; t < 3; ++t) {
    std::vector<double> ad(drives[t].grad().begin(), drives[t].grad().end());
    auto fd = oracle::fd_grad_tensor(drives[t], [&] {
      NoGradGuard ng;
      return run().item();
    });
    CHECK(oracle::rel_err_maxnorm(ad, fd) < 1e-3);
  }
  std::vector<double> ad_d(p.d_raw.grad().begin(), p.d_raw.grad().end());
  auto fd_d = oracle::fd_grad_tensor(p.d_raw, [&] {
    NoGradGuard ng;
    return run().item();
  });
  CHECK(oracle::rel_err_maxnorm(ad_d, fd_d) < 1e-3);
  std::vector<double> ad_v(p.v_th.grad().begin(), p.v_th.grad().end());
  auto fd_v = oracle::fd_grad_tensor(p.v_th, [&] {
    NoGradGuard ng;
    return run().item();
  });
  CHECK(oracle::rel_err_maxnorm(ad_v, fd_v) < 1e-3);
}

TEST_CASE("SNU backward applies arctanspike exactly where step fired") {
  // Hand-rolled per-step chain rule on a single neuron over 3 steps, against
  // the autodiff pass. Loss = sum_t c_t * y_t.
  using D = double;
  const double d = 0.65, v_th = 0.35;
  const double drives[3] = {0.9, -0.4, 0.7};
  const double c[3] = {1.0, -2.0, 0.5};
  const double a = kSurrogateSlope;

  auto p = cell_params<D>(d, v_th, NeuronKind::SNU);
  std::vector<TensorT<D>> drv;
  for (double v : drives) {
    auto t = one<D>(v);
    t.set_requires_grad(true);
    drv.push_back(t);
  }
  auto st = CellStateT<D>::zeros(1, 1, 1, NeuronKind::SNU);
  TensorT<D> loss;
  for (int t = 0; t < 3; ++t) {
    auto [y, next] = snu_step(drv[t], TensorT<D>(), st, p);
    st = next;
    auto term = scale(sum_all(y), static_cast<D>(c[t]));
    loss = loss.defined() ? add(loss, term) : term;
  }
  backward(loss);

  // forward replay
  double s[3], y[3];
  double s_prev = 0, y_prev = 0;
  for (int t = 0; t < 3; ++t) {
    s[t] = (1 - d) * drives[t] + d * s_prev * (1 - y_prev);
    y[t] = s[t] - v_th >= 0 ? 1.0 : 0.0;
    s_prev = s[t];
    y_prev = y[t];
  }
  // reverse pass, surrogate dy/ds = 1/(1 + a (s - v_th)^2)
  double gs_next = 0, gy_next = 0;
  double gx[3];
  for (int t = 2; t >= 0; --t) {
    double gy = c[t] + gy_next;
    double surr = 1.0 / (1.0 + a * (s[t] - v_th) * (s[t] - v_th));
    double gs = gy * surr + gs_next;
    gx[t] = gs * (1 - d);
    if (t > 0) {
      gs_next = gs * d * (1 - y[t - 1]);
      gy_next = gs * d * s[t - 1] * (-1.0);
    }
  }
  for (int t = 0; t < 3; ++t) CHECK(drv[t].grad()[0] == doctest::Approx(gx[t]).epsilon(1e-9));
}
