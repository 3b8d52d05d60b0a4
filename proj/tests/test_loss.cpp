#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowspike/loss.hpp"
#include "oracle.hpp"
#include "synthetic.hpp"

using namespace flowspike;

namespace {

EventWindow toy_window() {
  EventWindow w;
  w.t0 = 0;
  w.t1 = 1000;
  w.width = 8;
  w.height = 8;
  // interior events at varied sub-window times
  w.events.push_back({2, 2, 150, 1});
  w.events.push_back({3, 4, 400, 1});
  w.events.push_back({5, 3, 650, -1});
  w.events.push_back({4, 5, 900, -1});
  return w;
}

template <typename S>
TensorT<S> uniform_flow(int h, int w, double u, double v) {
  auto f = TensorT<S>::zeros(Shape{2, h, w});
  auto fv = f.value_mut();
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < plane; ++i) {
    fv[i] = static_cast<S>(u);
    fv[plane + i] = static_cast<S>(v);
  }
  return f;
}

}  // namespace

TEST_CASE("warp_events displacement and reference timestamps") {
  EventWindow w;
  w.t0 = 0;
  w.t1 = 1000;
  w.width = 8;
  w.height = 8;
  w.events.push_back({2, 2, 500, 1});  // tau = 0.5

  // zero flow: identity
  auto zero = uniform_flow<float>(8, 8, 0, 0);
  auto wz = warp_events(zero, w, WarpRef::End);
  CHECK(wz[0].x == doctest::Approx(2.0));
  CHECK(wz[0].y == doctest::Approx(2.0));

  // u=2: forward lands at x + (1-tau)*u = 3, backward at x - tau*u = 1
  auto f = uniform_flow<float>(8, 8, 2, 0);
  auto wf = warp_events(f, w, WarpRef::End);
  CHECK(wf[0].x == doctest::Approx(3.0));
  CHECK(wf[0].tau == doctest::Approx(0.5));
  auto wb = warp_events(f, w, WarpRef::Start);
  CHECK(wb[0].x == doctest::Approx(1.0));
  CHECK(wb[0].tau == doctest::Approx(0.5));

  // forward and backward tau' sum to 1 per event
  EventWindow t = toy_window();
  auto tf = warp_events(zero, t, WarpRef::End);
  auto tb = warp_events(zero, t, WarpRef::Start);
  for (std::size_t i = 0; i < t.events.size(); ++i)
    CHECK(tf[i].tau + tb[i].tau == doctest::Approx(1.0));
}

TEST_CASE("avg_timestamp_images") {
  // one ON event splatted exactly onto a pixel with tau' = 0.5
  std::vector<WarpedEvent> we = {{3.0, 2.0, 0.5, 1}};
  auto img = avg_timestamp_images<float>(we, 6, 6);
  CHECK(img.t_plus.at(2 * 6 + 3) == doctest::Approx(0.5f));
  CHECK(img.occupancy.at(2 * 6 + 3) == 1.0f);

  // two ON events on the same pixel average their timestamps
  std::vector<WarpedEvent> two = {{3.0, 2.0, 0.2, 1}, {3.0, 2.0, 0.8, 1}};
  auto img2 = avg_timestamp_images<float>(two, 6, 6);
  CHECK(img2.t_plus.at(2 * 6 + 3) == doctest::Approx(0.5f));

  // no events: all-zero images, zero occupancy
  auto img3 = avg_timestamp_images<float>({}, 4, 4);
  for (float v : img3.t_plus.value()) CHECK(v == 0.0f);
  for (float v : img3.occupancy.value()) CHECK(v == 0.0f);

  // bilinear splat conserves mass for interior points
  std::vector<WarpedEvent> frac = {{2.25, 3.75, 0.4, -1}};
  auto img4 = avg_timestamp_images<float>(frac, 8, 8);
  // all four corners hold the same average timestamp
  CHECK(img4.t_minus.at(3 * 8 + 2) == doctest::Approx(0.4f));
  CHECK(img4.t_minus.at(4 * 8 + 3) == doctest::Approx(0.4f));
}

TEST_CASE("contrast_loss basics") {
  EventWindow empty;
  empty.t0 = 0;
  empty.t1 = 100;
  empty.width = 4;
  empty.height = 4;
  auto zero = uniform_flow<float>(4, 4, 0, 0);
  CHECK(contrast_loss(zero, empty).item() == 0.0f);

  // non-negative on random data
  EventWindow t = toy_window();
  auto f = uniform_flow<float>(8, 8, 1.3, -0.4);
  CHECK(contrast_loss(f, t).item() >= 0.0f);
}

TEST_CASE("contrast loss prefers the true flow on rigid translation") {
  synthetic::BarParams p;
  p.width = 16;
  p.height = 16;
  p.n_windows = 1;
  p.u = 2.5;
  auto windows = synthetic::bar_windows(p);
  REQUIRE(windows.size() == 1);
  REQUIRE(windows[0].events.size() > 16);

  auto true_flow = uniform_flow<float>(16, 16, p.u, 0);
  auto zero_flow = uniform_flow<float>(16, 16, 0, 0);
  float l_true = total_loss(true_flow, windows[0]).item();
  float l_zero = total_loss(zero_flow, windows[0]).item();
  CHECK(l_true < l_zero);  // strict
}

TEST_CASE("contrast gradient matches finite differences on a toy window") {
  using D = double;
  EventWindow w = toy_window();
  auto flow = TensorT<D>::zeros(Shape{2, 8, 8});
  {
    Rng rng(40);
    auto fv = flow.value_mut();
    // keep warped positions well inside pixels so FD stays off the kinks
    for (auto& v : fv) v = rng.uniform(-0.3, 0.3);
  }
  flow.set_requires_grad(true);

  auto run = [&] { return contrast_loss(flow, w); };
  backward(run());
  std::vector<double> ad(flow.grad().begin(), flow.grad().end());
  auto fd = oracle::fd_grad_tensor(flow, [&] {
    NoGradGuard ng;
    return run().item();
  });
  CHECK(oracle::rel_err_maxnorm(ad, fd) < 1e-2);
}

TEST_CASE("charbonnier smoothness") {
  auto c = uniform_flow<float>(5, 7, 3.0, -2.0);
  CHECK(charbonnier_smoothness(c).item() == doctest::Approx(1e-3));

  // no neighbour pairs
  auto single = uniform_flow<float>(1, 1, 4.0, 4.0);
  CHECK(charbonnier_smoothness(single).item() == 0.0f);

  // FD gradient
  using D = double;
  auto flow = TensorT<D>::zeros(Shape{2, 4, 4});
  {
    Rng rng(41);
    auto fv = flow.value_mut();
    for (auto& v : fv) v = rng.uniform(-1, 1);
  }
  flow.set_requires_grad(true);
  backward(charbonnier_smoothness(flow));
  std::vector<double> ad(flow.grad().begin(), flow.grad().end());
  auto fd = oracle::fd_grad_tensor(flow, [&] {
    NoGradGuard ng;
    return charbonnier_smoothness(flow).item();
  });
  CHECK(oracle::rel_err_maxnorm(ad, fd) < 1e-3);
}

TEST_CASE("total_loss composition") {
  EventWindow w = toy_window();
  auto f = uniform_flow<float>(8, 8, 0.7, 0.2);

  float cfw = contrast_term(f, w, WarpRef::End).item();
  float cbw = contrast_term(f, w, WarpRef::Start).item();
  float sm = charbonnier_smoothness(f).item();

  // lambda = 0 reduces to the contrast sum
  CHECK(total_loss(f, w, 0.0f).item() == doctest::Approx(cfw + cbw));
  // additivity of the three terms
  CHECK(total_loss(f, w, 0.001f).item() == doctest::Approx(cfw + cbw + 0.001f * sm));

  // empty window: lambda * smoothness only
  EventWindow empty;
  empty.t0 = 0;
  empty.t1 = 100;
  empty.width = 8;
  empty.height = 8;
  CHECK(total_loss(f, empty, 0.5f).item() == doctest::Approx(0.5f * sm));
}

TEST_CASE("multi_res_loss") {
  EventWindow w = toy_window();
  auto f = uniform_flow<float>(8, 8, 0.5, -0.5);
  float single = total_loss(f, w).item();
  CHECK(multi_res_loss<float>({f}, w).item() == doctest::Approx(single));
  CHECK(multi_res_loss<float>({f, f}, w).item() == doctest::Approx(2 * single));
  CHECK_THROWS_AS(multi_res_loss<float>({}, w), validation_error);
}

TEST_CASE("splat mass conservation for interior warps") {
  // total splatted mass equals the event count when warped points stay >= 1
  // px inside the frame
  Rng rng(55);
  EventWindow w;
  w.t0 = 0;
  w.t1 = 1000;
  w.width = 12;
  w.height = 12;
  for (int i = 0; i < 40; ++i) {
    Event e;
    e.x = 3 + static_cast<int>(rng.below(6));
    e.y = 3 + static_cast<int>(rng.below(6));
    e.t = static_cast<std::int64_t>(rng.below(1000));
    e.p = rng.below(2) ? 1 : -1;
    w.events.push_back(e);
  }
  std::sort(w.events.begin(), w.events.end(),
            [](const Event& a, const Event& b) { return a.t < b.t; });
  auto flow = TensorT<float>::zeros(Shape{2, 12, 12});
  {
    auto fv = flow.value_mut();
    for (auto& v : fv) v = rng.uniformf(-1.5f, 1.5f);
  }
  auto warped = warp_events(flow, w, WarpRef::End);
  // tally bilinear mass
  double mass = 0;
  for (const auto& e : warped) {
    int x0 = static_cast<int>(std::floor(e.x)), y0 = static_cast<int>(std::floor(e.y));
    double fx = e.x - x0, fy = e.y - y0;
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        int xx = x0 + dx, yy = y0 + dy;
        if (xx < 0 || xx >= 12 || yy < 0 || yy >= 12) continue;
        mass += (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
      }
  }
  CHECK(mass == doctest::Approx(static_cast<double>(warped.size())).epsilon(1e-9));
}
