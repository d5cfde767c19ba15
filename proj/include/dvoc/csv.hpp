#pragma once

// CSV writers. One header row, LF line endings, shortest round-trip doubles.

#include <ostream>
#include <string>
#include <vector>

#include "dvoc/analysis.hpp"
#include "dvoc/sim.hpp"

namespace dvoc {

[[nodiscard]] std::string format_double(double x);

/// Columns: t, then <id>_va, _vb, _ia, _ib, _p, _q, _vmag, _theta per inverter.
void write_trace_csv(std::ostream& out, const Trace& trace);

/// Long format: metric,inverter,value. Inverter is empty for system-wide rows;
/// an undefined sync time is written as an empty value.
void write_metrics_csv(std::ostream& out, const Trace& trace, const SyncMetrics& metrics);

struct NamedCurve {
    std::string name;
    DroopCurve curve;
};

/// Columns: curve,source,axis,x,y.
void write_curve_csv(std::ostream& out, const std::vector<NamedCurve>& curves);

}  // namespace dvoc
