#pragma once

#include <string>
#include <vector>

#include "fnetlab/bench_record.hpp"

namespace fnetlab {

// CSV schema:
//   variant,n,d_h,layers,batch,phase,median_ms,steps_per_s,flops,peak_bytes,repeats,status
std::string bench_records_to_csv(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> bench_records_from_csv(const std::string& csv);

// Self-contained SVG line chart of median time vs sequence length for
// one phase: log2 horizontal axis, log10 vertical axis.
std::string render_time_vs_length_svg(const std::vector<BenchRecord>& records,
                                      BenchPhase phase);

// Speed-up multiplier vs the attention baseline per length.
std::string render_speedup_svg(const std::vector<BenchRecord>& records,
                               BenchPhase phase,
                               const std::string& baseline = "bert");

// Bar chart of analytic forward FLOPs per variant (largest n present).
std::string render_flops_bar_svg(const std::vector<BenchRecord>& records);

// Writes records.csv plus the three charts into out_dir (created if
// missing). Throws on an empty record list or an unwritable path.
void emit_report(const std::vector<BenchRecord>& records, const std::string& out_dir);

}  // namespace fnetlab
