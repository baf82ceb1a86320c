#pragma once

#include <string>

#include "fnetlab/common.hpp"

namespace fnetlab {

enum class BenchPhase { MixingOnly, FullForward, FullTrainStep, Inference };

inline const char* to_string(BenchPhase p) {
  switch (p) {
    case BenchPhase::MixingOnly: return "mixing_only";
    case BenchPhase::FullForward: return "full_forward";
    case BenchPhase::FullTrainStep: return "full_train_step";
    case BenchPhase::Inference: return "inference";
  }
  return "?";
}

inline BenchPhase bench_phase_from_string(const std::string& s) {
  if (s == "mixing_only") return BenchPhase::MixingOnly;
  if (s == "full_forward") return BenchPhase::FullForward;
  if (s == "full_train_step") return BenchPhase::FullTrainStep;
  if (s == "inference") return BenchPhase::Inference;
  throw Error("unknown bench phase: " + s);
}

// One timing/FLOP/memory measurement; failure cells (allocation failure,
// unsupported length) are recorded as rows, not errors.
struct BenchRecord {
  std::string variant;
  Index n = 0, d_h = 0, layers = 0, batch = 0;
  BenchPhase phase = BenchPhase::MixingOnly;
  double median_ms = 0;
  double steps_per_s = 0;
  double flops = 0;       // analytic, per timed unit
  double peak_bytes = 0;  // analytic estimate
  int repeats = 0;
  std::string status = "ok";  // ok | oom | unsupported_length

  bool ok() const { return status == "ok"; }
};

}  // namespace fnetlab
