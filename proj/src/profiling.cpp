#include "flowspike/profiling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "flowspike/training.hpp"

namespace flowspike {

namespace {

float nonzero_fraction(const Tensor& t) {
  std::int64_t nz = 0;
  for (float v : t.value())
    if (v != 0.0f) ++nz;
  return static_cast<float>(static_cast<double>(nz) / static_cast<double>(t.numel()));
}

std::string model_summary(const Model& m) {
  return std::to_string(m.config.n_stages) + " stages, " + std::to_string(m.config.base_channels) +
         " ch, " + to_string(m.config.neuron_kind) + "/" + to_string(m.config.recurrency) + ", " +
         std::to_string(m.width) + "x" + std::to_string(m.height);
}

}  // namespace

ActivityTrace activity_trace(Model& model, const std::vector<EventWindow>& windows) {
  NoGradGuard ng;
  reset_states(model);

  ActivityTrace trace;
  trace.layers.push_back("input");
  trace.layers.push_back("conv0");
  trace.layers.push_back("conv1");
  for (int k = 1; k <= model.config.n_stages; ++k) trace.layers.push_back("s" + std::to_string(k));
  for (int j = 1; j <= model.config.n_stages + 1; ++j)
    trace.layers.push_back("u" + std::to_string(j));
  trace.layers.push_back("pred");

  for (const EventWindow& w : windows) {
    std::map<std::string, float> row;
    LayerProbe<float> probe = [&](const std::string& name, const Tensor& t) {
      row[name] = nonzero_fraction(t);
    };
    forward(model, encode_for(model, w), &probe);
    std::vector<float> ordered;
    ordered.reserve(trace.layers.size());
    for (const std::string& name : trace.layers) ordered.push_back(row.at(name));
    trace.fractions.push_back(std::move(ordered));
  }
  return trace;
}

void write_activity_csv(const ActivityTrace& trace, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f << "step";
  for (const std::string& l : trace.layers) f << ',' << l;
  f << '\n';
  for (std::size_t s = 0; s < trace.fractions.size(); ++s) {
    f << s;
    for (float v : trace.fractions[s]) f << ',' << v;
    f << '\n';
  }
  if (!f) throw io_error("failed writing '" + path + "'");
}

SpeedReport speed_profile(Model& model, int n_runs, bool single_thread) {
  if (n_runs < 1) throw validation_error("speed_profile: n_runs must be >= 1");
  NoGradGuard ng;

  const int saved_threads = num_threads();
  if (single_thread) set_num_threads(1);

  Rng rng(42);
  Tensor input =
      Tensor::uniform(Shape{model.config.n_in, model.height, model.width}, 0.0f, 1.0f, rng);

  reset_states(model);
  constexpr int kWarmup = 5;
  for (int i = 0; i < kWarmup; ++i) forward(model, input);

  std::vector<double> ms(static_cast<std::size_t>(n_runs));
  for (int i = 0; i < n_runs; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    forward(model, input);
    auto t1 = std::chrono::steady_clock::now();
    ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  if (single_thread) set_num_threads(saved_threads);

  SpeedReport r;
  r.config = model_summary(model);
  r.n_runs = n_runs;
  r.threads = single_thread ? 1 : saved_threads;
  double sum = 0;
  r.min_ms = ms[0];
  for (double v : ms) {
    sum += v;
    r.min_ms = std::min(r.min_ms, v);
  }
  r.mean_ms = sum / n_runs;
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  r.median_ms = n_runs % 2 ? sorted[n_runs / 2]
                           : 0.5 * (sorted[n_runs / 2 - 1] + sorted[n_runs / 2]);
  double var = 0;
  for (double v : ms) var += (v - r.mean_ms) * (v - r.mean_ms);
  var /= n_runs;
  r.cov = r.mean_ms > 0 ? std::sqrt(var) / r.mean_ms : 0;
  r.fps = 1000.0 / r.mean_ms;
  return r;
}

std::vector<SweepRow> reduction_sweep(const std::vector<int>& stages,
                                      const std::vector<int>& channels, ArchConfig proto,
                                      int height, int width, int n_runs,
                                      const std::map<std::pair<int, int>, double>* metrics) {
  std::vector<SweepRow> rows;
  for (int s : stages)
    for (int c : channels) {
      ArchConfig cfg = proto;
      cfg.n_stages = s;
      cfg.base_channels = c;
      Model m = build<float>(cfg, height, width);
      SweepRow row;
      row.stages = s;
      row.channels = c;
      row.params = param_count(m);
      row.fps = speed_profile(m, n_runs).fps;
      if (metrics) {
        auto it = metrics->find({s, c});
        if (it != metrics->end()) row.metric = it->second;
      }
      rows.push_back(row);
    }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f << "stages,channels,params,fps,metric\n";
  for (const SweepRow& r : rows) {
    f << r.stages << ',' << r.channels << ',' << r.params << ',' << r.fps << ',';
    if (r.metric) f << *r.metric;
    f << '\n';
  }
  if (!f) throw io_error("failed writing '" + path + "'");
}

void write_sweep_plot_data(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  f << "x,y,size,label\n";
  for (const SweepRow& r : rows) {
    f << r.fps << ',';
    if (r.metric) f << *r.metric;
    f << ',' << r.params << ",s" << r.stages << "c" << r.channels << '\n';
  }
  if (!f) throw io_error("failed writing '" + path + "'");
}

}  // namespace flowspike
