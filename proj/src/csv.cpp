#include "dvoc/csv.hpp"

#include <array>
#include <charconv>

namespace dvoc {

std::string format_double(double x) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return {buf.data(), res.ptr};
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
    static constexpr std::array kColumns{"va", "vb", "ia", "ib", "p", "q", "vmag", "theta"};
    out << "t";
    for (const auto& s : trace.inverters)
        for (const char* c : kColumns) out << ',' << s.id << '_' << c;
    out << '\n';
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << format_double(trace.time[i]);
        for (const auto& s : trace.inverters) {
            for (const auto* col : {&s.va, &s.vb, &s.ia, &s.ib, &s.p, &s.q, &s.vmag, &s.theta})
                out << ',' << format_double((*col)[i]);
        }
        out << '\n';
    }
}

void write_metrics_csv(std::ostream& out, const Trace& trace, const SyncMetrics& m) {
    out << "metric,inverter,value\n";
    out << "sync_time,," << (m.sync_time ? format_double(*m.sync_time) : std::string()) << '\n';
    out << "residual,," << format_double(m.residual) << '\n';
    out << "steady_freq,," << format_double(m.steady_freq) << '\n';
    out << "settled,," << (m.settled ? 1 : 0) << '\n';
    for (std::size_t k = 0; k < trace.inverters.size(); ++k) {
        const std::string& id = trace.inverters[k].id;
        out << "steady_p," << id << ',' << format_double(m.steady_p.at(k)) << '\n';
        out << "steady_q," << id << ',' << format_double(m.steady_q.at(k)) << '\n';
        out << "steady_amplitude," << id << ',' << format_double(m.steady_amplitudes.at(k)) << '\n';
        out << "sharing_ratio," << id << ',' << format_double(m.sharing_ratios.at(k)) << '\n';
    }
}

void write_curve_csv(std::ostream& out, const std::vector<NamedCurve>& curves) {
    out << "curve,source,axis,x,y\n";
    for (const auto& c : curves) {
        const char* source = c.curve.source == CurveSource::closed_form ? "closed_form" : "simulated";
        const char* axis = c.curve.axis == DroopAxis::p ? "p" : "q";
        for (const auto& pt : c.curve.points)
            out << c.name << ',' << source << ',' << axis << ',' << format_double(pt.x) << ','
                << format_double(pt.y) << '\n';
    }
}

}  // namespace dvoc
