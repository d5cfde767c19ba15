#pragma once

// Closed-form oracles and trace post-processing.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dvoc/control.hpp"
#include "dvoc/network.hpp"
#include "dvoc/sim.hpp"

namespace dvoc {

// ---------------------------------------------------------------------------
// Black start
// ---------------------------------------------------------------------------

struct BlackStartCurve {
    std::vector<double> times;
    std::vector<double> magnitude;
    double h0 = 0.0;
    bool degenerate = false;  ///< v0 = 0: the origin never leaves
};

/// Amplitude trajectory of d|v|/dt = (eta alpha / v*^2)(v*^2 - |v|^2)|v| from |v(0)| = v0:
///   |v(t)| = v* h0 e^{eta alpha t} / sqrt(h0^2 e^{2 eta alpha t} + 1),  h0 = v0 / sqrt(|v0^2 - v*^2|)
/// for v0 < v*. Above v* the same integral gives the "- 1" branch; v0 = v* is the constant v*.
/// Throws ValidationError for negative or non-finite v0.
[[nodiscard]] BlackStartCurve blackstart_analytic(double v0, const DvocParams& params, std::span<const double> times);

struct BlackStartComparison {
    bool defined = false;  ///< false when the trace has no 5%..95% rise
    double max_relative_deviation = 0.0;
    double rise_start = 0.0;  ///< s
    double rise_end = 0.0;    ///< s
    std::size_t samples = 0;
};

/// Max relative deviation of the recorded |v| from the analytic curve over the
/// interval where |v| rises from 5% to 95% of v*.
[[nodiscard]] BlackStartComparison blackstart_compare(const Trace& trace, const DvocParams& params,
                                                      std::size_t inverter = 0);

// ---------------------------------------------------------------------------
// Trace metrics
// ---------------------------------------------------------------------------

/// Mean of the central-difference derivative of the unwrapped angle over
/// samples in [t_from, t_to], per inverter (rad/s). Throws std::domain_error
/// if any amplitude in the window falls below 1e-6 v*.
[[nodiscard]] std::vector<double> estimate_frequency(const Trace& trace, double t_from, double t_to);

/// Time after `trigger` (default: first event, else 0) at which the largest
/// pairwise |v_i - v_j| drops below threshold * v* and stays there for one
/// nominal period. Empty when that never happens.
[[nodiscard]] std::optional<double> sync_time(const Trace& trace, double threshold = 0.02,
                                              std::optional<double> trigger = std::nullopt);

struct SteadyState {
    bool settled = false;
    double p = 0.0;
    double q = 0.0;
    double vmag = 0.0;
    double omega = 0.0;
    double amplitude_drift = 0.0;  ///< peak-to-peak / mean over the window
    double frequency_drift = 0.0;  ///< peak-to-peak of per-period estimates / omega0
};

/// Averages over the final `periods` nominal periods; settled iff both
/// drifts are below `tolerance`.
[[nodiscard]] SteadyState measure_steady_state(const Trace& trace, std::size_t inverter, double periods = 5.0,
                                               double tolerance = 1e-4);

struct SyncMetrics {
    std::optional<double> sync_time;
    double residual = 0.0;  ///< final max pairwise |v_i - v_j|, V
    std::vector<double> sharing_ratios;
    double steady_freq = 0.0;
    std::vector<double> steady_amplitudes;
    std::vector<double> steady_p;
    std::vector<double> steady_q;
    bool settled = false;
};

[[nodiscard]] SyncMetrics compute_metrics(const Trace& trace, double threshold = 0.02);

// ---------------------------------------------------------------------------
// Droop characteristics
// ---------------------------------------------------------------------------

enum class DroopAxis { p, q };
enum class CurveSource { closed_form, simulated };

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
};

/// p axis: (p, omega) in rad/s. q axis: (q, |v|) in V. Abscissa strictly increasing.
struct DroopCurve {
    DroopAxis axis = DroopAxis::p;
    CurveSource source = CurveSource::closed_form;
    std::vector<CurvePoint> points;
};

struct StationaryPoint {
    double magnitude = 0.0;
    double omega = 0.0;
};

/// Stationary magnitude of the polar dVOC law for constant (p, q) and the
/// frequency there. Takes the largest root in [0.2 v*, 2 v*]: a downward scan
/// brackets it, bisection and a Newton polish refine it.
/// Throws std::domain_error when no stationary magnitude lies in that range.
[[nodiscard]] StationaryPoint stationary_point(const DvocParams& params, double p, double q);

/// Frequency predicted by the polar law at a given measured magnitude.
[[nodiscard]] double stationary_frequency(const DvocParams& params, double p, double q, double magnitude);

struct ClosedFormSweep {
    DroopCurve exact;
    DroopCurve approx;      ///< omega0 + eta/v*^2 (p* - p), or v* + (q* - q)/(alpha v*)
    DroopCurve linearized;  ///< same for p; v* + (q* - q)/(2 alpha v*) for q
};

/// Sweeps p with q held at q*, or q with p held at p*.
[[nodiscard]] ClosedFormSweep droop_sweep_closed_form(const DvocParams& params, DroopAxis axis,
                                                      std::span<const double> grid);

/// Scenario for one sweep point. p axis: first load set to G = value / v*^2.
/// q axis: value > 0 adds an R-L branch "sweep_q" (X/R = 10) from the first
/// inverter to ground drawing `value` var at v*; value < 0 adds capacitance at
/// the first inverter node instead.
[[nodiscard]] Scenario droop_sweep_variant(const Scenario& base, DroopAxis axis, double value);

struct SimulatedSweepPoint {
    double target = 0.0;
    SteadyState steady;
    std::string error;
};

struct SimulatedSweep {
    DroopCurve curve;  ///< settled points only
    std::vector<SimulatedSweepPoint> points;
};

[[nodiscard]] SimulatedSweep droop_sweep_simulated(const Scenario& base, DroopAxis axis, std::span<const double> grid,
                                                   const SimConfig& config, unsigned threads = 0);

struct StationarityResidual {
    double omega_rel = 0.0;      ///< |omega_meas - omega_law(p, q, |v|)| / omega0
    double magnitude_rel = 0.0;  ///< |(|v|_meas - |v|_stationary)| / |v|_stationary
};

[[nodiscard]] StationarityResidual stationarity_residual(const DvocParams& params, const SteadyState& steady);

// ---------------------------------------------------------------------------
// Set-point consistency
// ---------------------------------------------------------------------------

/// Quasi-static (p, q) injected by each inverter for the given terminal voltages.
[[nodiscard]] std::vector<PowerPair> forward_power_flow(const Topology& topo, double omega,
                                                        std::span<const AlphaBetaVec> voltages);

enum class ConsistencyStatus { consistent, inconsistent, unsolved };

struct ConsistencyReport {
    ConsistencyStatus status = ConsistencyStatus::unsolved;
    double residual = 0.0;     ///< Euclidean norm of (p - p*, q - q*) over all inverters, W/var
    double residual_pu = 0.0;  ///< residual over the largest |p*| or |q*| (1 if all are zero)
    std::vector<double> angles;  ///< rad, first inverter is the reference
    std::vector<PowerPair> achieved;
    int iterations = 0;
};

/// Holds |v_i| = v*_i and solves the phase angles for the set-points by
/// Gauss-Newton on the quasi-static power flow.
[[nodiscard]] ConsistencyReport check_setpoint_consistency(const Topology& topo, std::span<const SetPoints> set_points,
                                                           double omega, double tolerance = 1e-6);

[[nodiscard]] const char* to_string(ConsistencyStatus s);

}  // namespace dvoc
