#pragma once

// Electrical plant seen by the inverters: RL branches between inverter nodes,
// resistive load nodes and ground, plus a shunt filter capacitor at every
// inverter node. Inverter nodes are ideal controlled voltage sources.
//
// Two models share one Topology:
//   * quasi-static: phasor solution at a fixed frequency,
//   * dynamic: branch inductor currents as states, load-node voltages
//     resolved algebraically from KCL every evaluation.

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dvoc/vec2.hpp"

namespace dvoc {

/// Reserved node id for the common return.
inline constexpr std::string_view kGroundNode = "gnd";

struct InverterNode {
    std::string id;
    double c_farad = 0.0;  ///< filter capacitor, sits behind the current measurement

    friend bool operator==(const InverterNode&, const InverterNode&) = default;
};

struct LoadNode {
    std::string id;
    double g_siemens = 0.0;  ///< resistive load to ground

    friend bool operator==(const LoadNode&, const LoadNode&) = default;
};

struct Branch {
    std::string id;
    std::string from;
    std::string to;
    double r_ohm = 0.0;
    double l_henry = 0.0;
    bool connected = true;

    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Topology {
    std::vector<InverterNode> inverters;
    std::vector<LoadNode> loads;
    std::vector<Branch> branches;

    friend bool operator==(const Topology&, const Topology&) = default;
};

/// Throws ValidationError listing every structural problem.
void validate(const Topology& topo);

[[nodiscard]] std::optional<std::size_t> find_inverter(const Topology& topo, std::string_view id);
[[nodiscard]] std::optional<std::size_t> find_load(const Topology& topo, std::string_view id);
[[nodiscard]] std::optional<std::size_t> find_branch(const Topology& topo, std::string_view id);

/// Complex node admittance over inverter nodes followed by load nodes
/// (ground eliminated). A complex entry g + jb acts on alpha-beta vectors as
/// the real block [[g, -b], [b, g]].
struct BlockAdmittance {
    Eigen::MatrixXcd y;
    std::size_t inverter_count = 0;

    [[nodiscard]] Mat2 block(std::size_t row, std::size_t col) const;
};

[[nodiscard]] Mat2 to_block(std::complex<double> y);
[[nodiscard]] std::complex<double> to_complex(AlphaBetaVec v);
[[nodiscard]] AlphaBetaVec to_alpha_beta(std::complex<double> z);

/// Throws TopologyError when a load node has neither a load nor a connected branch.
[[nodiscard]] BlockAdmittance build_admittance(const Topology& topo, double omega);

struct QuasiStaticSolution {
    std::vector<AlphaBetaVec> inverter_currents;  ///< includes filter-capacitor current
    std::vector<AlphaBetaVec> load_voltages;
    std::vector<AlphaBetaVec> branch_currents;    ///< zero for open branches
};

/// Kron-reduced phasor network. Load nodes are eliminated once at construction.
class QuasiStaticNetwork {
public:
    QuasiStaticNetwork(const Topology& topo, double omega);

    [[nodiscard]] std::vector<AlphaBetaVec> currents(std::span<const AlphaBetaVec> inverter_voltages) const;
    [[nodiscard]] QuasiStaticSolution solve(std::span<const AlphaBetaVec> inverter_voltages) const;

    /// Reduced admittance seen from the inverter terminals.
    [[nodiscard]] const Eigen::MatrixXcd& reduced() const { return reduced_; }
    [[nodiscard]] double omega() const { return omega_; }

private:
    Topology topo_;
    double omega_;
    BlockAdmittance full_;
    Eigen::MatrixXcd reduced_;
    Eigen::MatrixXcd load_map_;  ///< v_load = load_map_ * v_inverter
};

[[nodiscard]] std::vector<AlphaBetaVec> solve_currents_quasistatic(const Topology& topo, double omega,
                                                                   std::span<const AlphaBetaVec> inverter_voltages);

/// Inductor currents, one slot per Topology branch. Slots of open or purely
/// resistive branches stay zero.
struct NetworkState {
    std::vector<AlphaBetaVec> branch_currents;
};

/// Electromagnetic-transient model of the branch currents.
class DynamicNetwork {
public:
    /// Throws TopologyError if KCL at the load nodes cannot be solved for their voltages.
    explicit DynamicNetwork(const Topology& topo);

    /// Fills d(branch currents)/dt and the branch-side current leaving each
    /// inverter node (capacitor current excluded).
    void evaluate(std::span<const AlphaBetaVec> inverter_voltages, std::span<const AlphaBetaVec> branch_currents,
                  std::span<AlphaBetaVec> d_branch_currents, std::span<AlphaBetaVec> injections) const;

    [[nodiscard]] std::vector<AlphaBetaVec> load_voltages(std::span<const AlphaBetaVec> inverter_voltages,
                                                          std::span<const AlphaBetaVec> branch_currents) const;

    /// Largest |eigenvalue| of the homogeneous branch-current dynamics, 1/s.
    [[nodiscard]] double stiffest_rate() const;

    [[nodiscard]] std::size_t branch_count() const { return branch_count_; }
    [[nodiscard]] std::size_t inverter_count() const { return inverter_count_; }

private:
    struct Inductive {
        std::size_t slot;  ///< index into the topology branch list
        int from;
        int to;
        double r;
        double inv_l;
    };
    struct Resistive {
        int from;
        int to;
        double g;
    };

    [[nodiscard]] double node_voltage_component(int node, int component, std::span<const AlphaBetaVec> inverter_v,
                                                const std::vector<AlphaBetaVec>& load_v) const;

    std::size_t inverter_count_ = 0;
    std::size_t load_count_ = 0;
    std::size_t branch_count_ = 0;
    std::vector<Inductive> inductive_;
    std::vector<Resistive> resistive_;
    Eigen::MatrixXd from_currents_;  ///< load voltages per unit inductor current
    Eigen::MatrixXd from_sources_;   ///< load voltages per unit inverter voltage
    double stiffest_ = 0.0;
};

/// d(branch currents)/dt for the given inverter voltages.
[[nodiscard]] NetworkState dynamic_rhs(const Topology& topo, const NetworkState& state,
                                       std::span<const AlphaBetaVec> inverter_voltages);

struct BranchSwitch {
    std::string branch;
    bool close = true;

    friend bool operator==(const BranchSwitch&, const BranchSwitch&) = default;
};

struct LoadChange {
    std::string load;
    double g_siemens = 0.0;

    friend bool operator==(const LoadChange&, const LoadChange&) = default;
};

/// Controller-side event; leaves the topology untouched.
struct SetPointChange {
    std::string inverter;
    std::optional<double> p_star;
    std::optional<double> q_star;
    std::optional<double> v_star;  ///< peak volts

    friend bool operator==(const SetPointChange&, const SetPointChange&) = default;
};

using EventAction = std::variant<BranchSwitch, LoadChange, SetPointChange>;

struct Event {
    double time = 0.0;
    EventAction action;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Applies a topology event. Islanding a load is allowed; a note is appended to `log`.
[[nodiscard]] Topology apply_event(const Topology& topo, const Event& event, std::vector<std::string>* log = nullptr);

struct PowerPair {
    double p = 0.0;
    double q = 0.0;
};

/// p = v^T i, q = v^T J i = v_b i_a - v_a i_b.
[[nodiscard]] constexpr PowerPair measure_power(AlphaBetaVec v, AlphaBetaVec i) {
    return {v.a * i.a + v.b * i.b, v.b * i.a - v.a * i.b};
}

}  // namespace dvoc
