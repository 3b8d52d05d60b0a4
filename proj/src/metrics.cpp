#include "flowspike/metrics.hpp"

#include <cmath>

namespace flowspike {

namespace {

void check_sample(const EvalSample& s) {
  if (s.pred.shape().rank() != 3 || s.pred.shape()[0] != 2)
    throw shape_error("eval: pred must be 2xHxW, got " + s.pred.shape().str());
  if (s.pred.shape() != s.gt.shape())
    throw shape_error("eval: pred " + s.pred.shape().str() + " vs gt " + s.gt.shape().str());
  const std::size_t plane =
      static_cast<std::size_t>(s.pred.shape()[1]) * s.pred.shape()[2];
  if (s.valid.size() != plane || s.event_mask.size() != plane)
    throw shape_error("eval: mask size does not match " + s.pred.shape().str());
}

template <typename F>
void for_each_masked(const EvalSample& s, F&& fn) {
  const int h = s.pred.shape()[1], w = s.pred.shape()[2];
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  auto p = s.pred.value();
  auto g = s.gt.value();
  for (std::size_t i = 0; i < plane; ++i) {
    if (!s.valid[i] || !s.event_mask[i]) continue;
    double du = static_cast<double>(p[i]) - g[i];
    double dv = static_cast<double>(p[plane + i]) - g[plane + i];
    fn(std::sqrt(du * du + dv * dv));
  }
}

}  // namespace

double aee(const EvalSample& s) {
  check_sample(s);
  double acc = 0;
  std::int64_t n = 0;
  for_each_masked(s, [&](double err) {
    acc += err;
    ++n;
  });
  if (n == 0) throw validation_error("no evaluable pixels");
  return acc / static_cast<double>(n);
}

double outlier_pct(const EvalSample& s, double threshold) {
  check_sample(s);
  std::int64_t n = 0, out = 0;
  for_each_masked(s, [&](double err) {
    ++n;
    if (err > threshold) ++out;
  });
  if (n == 0) throw validation_error("no evaluable pixels");
  return 100.0 * static_cast<double>(out) / static_cast<double>(n);
}

double waee(double aee_od1, double aee_if1, double aee_if2, double aee_if3,
            const WaeeWeights& w) {
  return (aee_od1 / w.od1 + aee_if1 / w.if1 + aee_if2 / w.if2 + aee_if3 / w.if3) / 4.0;
}

}  // namespace flowspike
