#pragma once

// Spiking-activity traces, single-core latency profiling, and stage/channel
// reduction sweeps.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowspike/encoding.hpp"
#include "flowspike/network.hpp"

namespace flowspike {

struct ActivityTrace {
  std::vector<std::string> layers;            // input, conv0/1, s1.., u1.., pred
  std::vector<std::vector<float>> fractions;  // [step][layer], non-zero fraction
};

// Runs stateful inference over the windows (states reset first) and records
// the fraction of non-zero outputs per layer per step.
ActivityTrace activity_trace(Model& model, const std::vector<EventWindow>& windows);

void write_activity_csv(const ActivityTrace& trace, const std::string& path);

struct SpeedReport {
  std::string config;  // human-readable model summary
  int n_runs = 0;
  double mean_ms = 0, median_ms = 0, min_ms = 0;
  double fps = 0;  // 1 / mean latency
  double cov = 0;  // coefficient of variation of per-run latency
  int threads = 1;
};

// Times n_runs forward passes on a deterministic random input after 5
// warm-up runs. single_thread pins the kernels to one thread for the
// duration (the paper's measurement mode).
SpeedReport speed_profile(Model& model, int n_runs = 100, bool single_thread = true);

struct SweepRow {
  int stages = 0;
  int channels = 0;
  std::int64_t params = 0;
  double fps = 0;
  std::optional<double> metric;  // e.g. WAEE, when supplied
};

// Builds one model per (stages, channels) grid point at the given input size
// and profiles it. Optional metrics (keyed by {stages, channels}) are merged
// into the table for the scatter-plot output.
std::vector<SweepRow> reduction_sweep(const std::vector<int>& stages,
                                      const std::vector<int>& channels, ArchConfig proto,
                                      int height, int width, int n_runs = 20,
                                      const std::map<std::pair<int, int>, double>* metrics = nullptr);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
// x = fps, y = metric (empty when absent), size = params, label = "s{S}c{C}"
void write_sweep_plot_data(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace flowspike
