#pragma once

// Sparse-flow evaluation: endpoint errors over pixels that have both ground
// truth and events, outlier percentage, and the weighted AEE combining the
// four benchmark sequences.

#include <cstdint>
#include <vector>

#include "flowspike/tensor.hpp"

namespace flowspike {

struct EvalSample {
  Tensor pred;                      // 2xHxW
  Tensor gt;                        // 2xHxW
  std::vector<std::uint8_t> valid;  // HxW, ground truth present
  std::vector<std::uint8_t> event_mask;  // HxW, >=1 event in the window
};

// Mean endpoint error over pixels where valid && event_mask. Throws
// "no evaluable pixels" when the combined mask is empty.
double aee(const EvalSample& s);

// Percentage of evaluable pixels whose endpoint error exceeds threshold.
double outlier_pct(const EvalSample& s, double threshold = 3.0);

struct WaeeWeights {
  double od1, if1, if2, if3;
  static WaeeWeights dt1() { return {0.5375, 0.7975, 1.5475, 1.2775}; }
  static WaeeWeights dt4() { return {2.0150, 2.9900, 5.3675, 4.3600}; }
};

double waee(double aee_od1, double aee_if1, double aee_if2, double aee_if3,
            const WaeeWeights& w);

}  // namespace flowspike
