#pragma once

// Fixed-step RK4 integration of inverter controllers coupled through the
// network, with a timeline of topology and set-point events.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "dvoc/control.hpp"
#include "dvoc/network.hpp"

namespace dvoc {

enum class NetworkModel { quasistatic, dynamic };

struct SimConfig {
    double dt = 1e-6;                       ///< s
    double t_end = 1.0;                     ///< s
    std::optional<double> sampled_hz;       ///< controller sample rate; empty = continuous
    NetworkModel network = NetworkModel::dynamic;
    int record_decimation = 100;
    std::uint64_t noise_seed = 0;
    double noise_amplitude = 0.0;           ///< per-step state noise, fraction of v*
    double blackstart_fraction = 1e-3;      ///< default |v(0)| / v* for dVOC inverters
    std::optional<double> network_omega;    ///< quasi-static frequency; default: first inverter's omega0

    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

/// Throws ValidationError listing every bad field.
void validate(const SimConfig& config);

/// Controller steps per sample, or 0 in continuous mode.
[[nodiscard]] std::size_t sample_interval_steps(const SimConfig& config);

using Controller = std::variant<DvocParams, DroopParams>;

[[nodiscard]] double v_star_of(const Controller& c);
[[nodiscard]] double omega0_of(const Controller& c);

struct InverterSpec {
    std::string id;  ///< must name an inverter node of the topology
    Controller controller;
    std::optional<PolarState> initial;

    friend bool operator==(const InverterSpec&, const InverterSpec&) = default;
};

struct Scenario {
    std::string name;
    std::vector<InverterSpec> inverters;
    Topology topology;
    std::vector<Event> events;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Structural checks: topology, inverter/node correspondence, event references and ordering.
void validate(const Scenario& scenario);

/// dVOC inverters carry their alpha-beta voltage, droop inverters their polar state.
using InverterState = std::variant<DvocState, PolarState>;

struct SystemState {
    std::uint64_t step_index = 0;
    double time = 0.0;
    std::vector<Controller> controllers;
    std::vector<InverterState> inverters;
    NetworkState network;  ///< one slot per topology branch
    Topology topology;
    std::vector<AlphaBetaVec> held_currents;  ///< sampled mode only
};

/// Output current and voltage of one inverter at a given state.
struct Measurement {
    AlphaBetaVec v;
    AlphaBetaVec i_o;
};

struct InverterSeries {
    std::string id;
    std::vector<double> va, vb, ia, ib, p, q, vmag, theta;
};

struct EventMarker {
    double time = 0.0;
    std::string description;
};

struct Trace {
    double sample_interval = 0.0;
    std::vector<double> time;
    std::vector<InverterSeries> inverters;
    std::vector<Controller> initial_controllers;
    std::vector<Controller> final_controllers;
    std::vector<EventMarker> events;
    std::vector<std::string> log;

    [[nodiscard]] std::size_t size() const { return time.size(); }
};

/// Owns one run: state, compiled network and RNG. Not shareable across threads.
class Simulator {
public:
    Simulator(const Scenario& scenario, const SimConfig& config);
    Simulator(SystemState state, const SimConfig& config);
    ~Simulator();
    Simulator(Simulator&&) noexcept;
    Simulator& operator=(Simulator&&) noexcept;

    /// One RK4 step of size dt. Throws NumericError on non-finite state.
    void step();

    /// Topology or set-point change, applied between steps.
    void apply(const Event& event);

    [[nodiscard]] const SystemState& state() const;
    [[nodiscard]] std::vector<Measurement> measure() const;
    [[nodiscard]] const std::vector<std::string>& log() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Stateless single step: compiles the network from state.topology.
[[nodiscard]] SystemState step(const SystemState& state, const SimConfig& config);

/// Integrates from t = 0 to t_end. Events fire at the first step boundary at
/// or after their timestamp.
[[nodiscard]] Trace run_scenario(const Scenario& scenario, const SimConfig& config);

struct BatchJob {
    Scenario scenario;
    SimConfig config;
};

struct BatchResult {
    std::optional<Trace> trace;
    std::string error;
    bool numeric_failure = false;
};

/// Runs independent jobs on up to `threads` workers; results keep job order.
[[nodiscard]] std::vector<BatchResult> run_batch(const std::vector<BatchJob>& jobs, unsigned threads = 0);

}  // namespace dvoc
