#include "dvoc/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "dvoc/errors.hpp"

namespace dvoc {

namespace {

using cd = std::complex<double>;

// Node numbering shared by both models: inverters, then loads; ground is -1.
class NodeMap {
public:
    explicit NodeMap(const Topology& topo) : inverters_(topo.inverters.size()) {
        for (std::size_t k = 0; k < topo.inverters.size(); ++k) index_.emplace(topo.inverters[k].id, static_cast<int>(k));
        for (std::size_t k = 0; k < topo.loads.size(); ++k)
            index_.emplace(topo.loads[k].id, static_cast<int>(inverters_ + k));
    }

    [[nodiscard]] int operator()(const std::string& id) const {
        if (id == kGroundNode) return -1;
        return index_.at(id);
    }

    [[nodiscard]] std::size_t inverters() const { return inverters_; }

private:
    std::size_t inverters_;
    std::unordered_map<std::string, int> index_;
};

cd branch_admittance(const Branch& b, double omega) { return 1.0 / cd(b.r_ohm, omega * b.l_henry); }

// Load nodes with G > 0 that cannot reach any inverter over connected branches.
std::vector<std::string> unfed_loads(const Topology& topo) {
    const NodeMap nodes(topo);
    const std::size_t total = topo.inverters.size() + topo.loads.size();
    std::vector<std::vector<int>> adj(total);
    for (const auto& b : topo.branches) {
        if (!b.connected) continue;
        const int f = nodes(b.from);
        const int t = nodes(b.to);
        if (f < 0 || t < 0) continue;
        adj[static_cast<std::size_t>(f)].push_back(t);
        adj[static_cast<std::size_t>(t)].push_back(f);
    }
    std::vector<bool> fed(total, false);
    std::vector<int> stack;
    for (std::size_t k = 0; k < topo.inverters.size(); ++k) {
        fed[k] = true;
        stack.push_back(static_cast<int>(k));
    }
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        for (int m : adj[static_cast<std::size_t>(n)]) {
            if (!fed[static_cast<std::size_t>(m)]) {
                fed[static_cast<std::size_t>(m)] = true;
                stack.push_back(m);
            }
        }
    }
    std::vector<std::string> out;
    for (std::size_t k = 0; k < topo.loads.size(); ++k)
        if (topo.loads[k].g_siemens > 0.0 && !fed[topo.inverters.size() + k]) out.push_back(topo.loads[k].id);
    return out;
}

}  // namespace

void validate(const Topology& topo) {
    std::vector<std::string> problems;
    std::set<std::string> nodes;
    auto add_node = [&](const std::string& id, const char* kind) {
        if (id.empty()) {
            problems.push_back(std::string(kind) + " node with empty id");
        } else if (id == kGroundNode) {
            problems.push_back(std::string(kind) + " node may not use reserved id '" + std::string(kGroundNode) + "'");
        } else if (!nodes.insert(id).second) {
            problems.push_back("duplicate node id '" + id + "'");
        }
    };
    for (const auto& inv : topo.inverters) {
        add_node(inv.id, "inverter");
        if (!(inv.c_farad >= 0.0) || !std::isfinite(inv.c_farad))
            problems.push_back("inverter '" + inv.id + "': capacitance must be finite and >= 0");
    }
    for (const auto& load : topo.loads) {
        add_node(load.id, "load");
        if (!(load.g_siemens >= 0.0) || !std::isfinite(load.g_siemens))
            problems.push_back("load '" + load.id + "': conductance must be finite and >= 0");
    }
    std::set<std::string> branch_ids;
    for (const auto& b : topo.branches) {
        const std::string name = "branch '" + b.id + "'";
        if (!branch_ids.insert(b.id).second) problems.push_back("duplicate branch id '" + b.id + "'");
        for (const auto* end : {&b.from, &b.to})
            if (*end != kGroundNode && !nodes.contains(*end))
                problems.push_back(name + ": unknown node '" + *end + "'");
        if (b.from == b.to) problems.push_back(name + ": both ends on node '" + b.from + "'");
        if (!(b.r_ohm >= 0.0) || !std::isfinite(b.r_ohm)) problems.push_back(name + ": r_ohm must be finite and >= 0");
        if (!(b.l_henry >= 0.0) || !std::isfinite(b.l_henry))
            problems.push_back(name + ": l_henry must be finite and >= 0");
        if (b.r_ohm == 0.0 && b.l_henry == 0.0) problems.push_back(name + ": zero impedance (R = L = 0)");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
}

std::optional<std::size_t> find_inverter(const Topology& topo, std::string_view id) {
    for (std::size_t k = 0; k < topo.inverters.size(); ++k)
        if (topo.inverters[k].id == id) return k;
    return std::nullopt;
}

std::optional<std::size_t> find_load(const Topology& topo, std::string_view id) {
    for (std::size_t k = 0; k < topo.loads.size(); ++k)
        if (topo.loads[k].id == id) return k;
    return std::nullopt;
}

std::optional<std::size_t> find_branch(const Topology& topo, std::string_view id) {
    for (std::size_t k = 0; k < topo.branches.size(); ++k)
        if (topo.branches[k].id == id) return k;
    return std::nullopt;
}

Mat2 to_block(std::complex<double> y) { return {y.real(), -y.imag(), y.imag(), y.real()}; }
std::complex<double> to_complex(AlphaBetaVec v) { return {v.a, v.b}; }
AlphaBetaVec to_alpha_beta(std::complex<double> z) { return {z.real(), z.imag()}; }

Mat2 BlockAdmittance::block(std::size_t row, std::size_t col) const {
    return to_block(y(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)));
}

BlockAdmittance build_admittance(const Topology& topo, double omega) {
    validate(topo);
    const NodeMap nodes(topo);
    const auto n = static_cast<Eigen::Index>(topo.inverters.size() + topo.loads.size());
    BlockAdmittance out;
    out.inverter_count = topo.inverters.size();
    out.y = Eigen::MatrixXcd::Zero(n, n);

    std::vector<bool> touched(static_cast<std::size_t>(n), false);
    for (const auto& b : topo.branches) {
        if (!b.connected) continue;
        const cd y = branch_admittance(b, omega);
        const int f = nodes(b.from);
        const int t = nodes(b.to);
        if (f >= 0) {
            out.y(f, f) += y;
            touched[static_cast<std::size_t>(f)] = true;
        }
        if (t >= 0) {
            out.y(t, t) += y;
            touched[static_cast<std::size_t>(t)] = true;
        }
        if (f >= 0 && t >= 0) {
            out.y(f, t) -= y;
            out.y(t, f) -= y;
        }
    }
    for (std::size_t k = 0; k < topo.inverters.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        out.y(i, i) += cd(0.0, omega * topo.inverters[k].c_farad);
    }
    std::vector<std::string> isolated;
    for (std::size_t k = 0; k < topo.loads.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(topo.inverters.size() + k);
        out.y(i, i) += topo.loads[k].g_siemens;
        if (topo.loads[k].g_siemens == 0.0 && !touched[static_cast<std::size_t>(i)])
            isolated.push_back("load node '" + topo.loads[k].id + "' has no load and no connected branch");
    }
    if (!isolated.empty()) throw TopologyError(std::move(isolated));
    return out;
}

QuasiStaticNetwork::QuasiStaticNetwork(const Topology& topo, double omega)
    : topo_(topo), omega_(omega), full_(build_admittance(topo, omega)) {
    const auto ns = static_cast<Eigen::Index>(topo.inverters.size());
    const auto nl = static_cast<Eigen::Index>(topo.loads.size());
    const Eigen::MatrixXcd yss = full_.y.topLeftCorner(ns, ns);
    if (nl == 0) {
        reduced_ = yss;
        load_map_ = Eigen::MatrixXcd::Zero(0, ns);
        return;
    }
    const Eigen::MatrixXcd ysl = full_.y.topRightCorner(ns, nl);
    const Eigen::MatrixXcd yls = full_.y.bottomLeftCorner(nl, ns);
    const Eigen::MatrixXcd yll = full_.y.bottomRightCorner(nl, nl);
    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(yll);
    if (lu.rank() < nl) throw TopologyError("load-node admittance is singular; some load node has no return path");
    load_map_ = -lu.solve(yls);
    reduced_ = yss + ysl * load_map_;
}

std::vector<AlphaBetaVec> QuasiStaticNetwork::currents(std::span<const AlphaBetaVec> inverter_voltages) const {
    const auto ns = reduced_.rows();
    std::vector<AlphaBetaVec> out(static_cast<std::size_t>(ns));
    for (Eigen::Index r = 0; r < ns; ++r) {
        cd acc = 0.0;
        for (Eigen::Index c = 0; c < ns; ++c) acc += reduced_(r, c) * to_complex(inverter_voltages[static_cast<std::size_t>(c)]);
        out[static_cast<std::size_t>(r)] = to_alpha_beta(acc);
    }
    return out;
}

QuasiStaticSolution QuasiStaticNetwork::solve(std::span<const AlphaBetaVec> inverter_voltages) const {
    const auto ns = reduced_.rows();
    Eigen::VectorXcd vs(ns);
    for (Eigen::Index k = 0; k < ns; ++k) vs(k) = to_complex(inverter_voltages[static_cast<std::size_t>(k)]);
    const Eigen::VectorXcd vl = load_map_ * vs;
    const Eigen::VectorXcd is = reduced_ * vs;

    QuasiStaticSolution sol;
    for (Eigen::Index k = 0; k < ns; ++k) sol.inverter_currents.push_back(to_alpha_beta(is(k)));
    for (Eigen::Index k = 0; k < vl.size(); ++k) sol.load_voltages.push_back(to_alpha_beta(vl(k)));

    const NodeMap nodes(topo_);
    auto node_v = [&](const std::string& id) -> cd {
        const int n = nodes(id);
        if (n < 0) return 0.0;
        if (static_cast<Eigen::Index>(n) < ns) return vs(n);
        return vl(n - ns);
    };
    for (const auto& b : topo_.branches) {
        if (!b.connected) {
            sol.branch_currents.push_back({});
            continue;
        }
        sol.branch_currents.push_back(to_alpha_beta(branch_admittance(b, omega_) * (node_v(b.from) - node_v(b.to))));
    }
    return sol;
}

std::vector<AlphaBetaVec> solve_currents_quasistatic(const Topology& topo, double omega,
                                                     std::span<const AlphaBetaVec> inverter_voltages) {
    if (inverter_voltages.size() != topo.inverters.size())
        throw ValidationError("expected one voltage per inverter node");
    return QuasiStaticNetwork(topo, omega).currents(inverter_voltages);
}

DynamicNetwork::DynamicNetwork(const Topology& topo)
    : inverter_count_(topo.inverters.size()), load_count_(topo.loads.size()), branch_count_(topo.branches.size()) {
    validate(topo);
    const NodeMap nodes(topo);
    const auto n = static_cast<int>(inverter_count_);
    const auto m = static_cast<Eigen::Index>(load_count_);

    for (std::size_t k = 0; k < topo.branches.size(); ++k) {
        const auto& b = topo.branches[k];
        if (!b.connected) continue;
        if (b.l_henry > 0.0) {
            inductive_.push_back({k, nodes(b.from), nodes(b.to), b.r_ohm, 1.0 / b.l_henry});
        } else {
            resistive_.push_back({nodes(b.from), nodes(b.to), 1.0 / b.r_ohm});
        }
    }

    // KCL at load nodes: M v_load = S v_src - D i_ind.
    Eigen::MatrixXd kcl = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd src = Eigen::MatrixXd::Zero(m, n);
    const auto nind = static_cast<Eigen::Index>(inductive_.size());
    Eigen::MatrixXd leaving = Eigen::MatrixXd::Zero(m, nind);
    for (Eigen::Index k = 0; k < m; ++k) kcl(k, k) += topo.loads[static_cast<std::size_t>(k)].g_siemens;
    for (const auto& r : resistive_) {
        for (auto [self, other] : {std::pair{r.from, r.to}, std::pair{r.to, r.from}}) {
            if (self < n) continue;  // inverter or ground end: no unknown
            const Eigen::Index row = self - n;
            kcl(row, row) += r.g;
            if (other >= n) {
                kcl(row, other - n) -= r.g;
            } else if (other >= 0) {
                src(row, other) += r.g;
            }
        }
    }
    for (Eigen::Index j = 0; j < nind; ++j) {
        const auto& b = inductive_[static_cast<std::size_t>(j)];
        if (b.from >= n) leaving(b.from - n, j) += 1.0;
        if (b.to >= n) leaving(b.to - n, j) -= 1.0;
    }
    if (m > 0) {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(kcl);
        if (lu.rank() < m) {
            std::vector<std::string> problems;
            for (Eigen::Index k = 0; k < m; ++k)
                if (kcl(k, k) == 0.0)
                    problems.push_back("load node '" + topo.loads[static_cast<std::size_t>(k)].id +
                                       "' has zero conductance and no resistive path: KCL is structurally singular");
            if (problems.empty()) problems.push_back("load-node KCL system is singular");
            throw TopologyError(std::move(problems));
        }
        from_currents_ = -lu.solve(leaving);
        from_sources_ = lu.solve(src);
    } else {
        from_currents_ = Eigen::MatrixXd::Zero(0, nind);
        from_sources_ = Eigen::MatrixXd::Zero(0, n);
    }

    // Homogeneous dynamics with sources at zero: di/dt = L^-1 (E v_load - R i).
    if (nind > 0) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nind, nind);
        for (Eigen::Index j = 0; j < nind; ++j) {
            const auto& b = inductive_[static_cast<std::size_t>(j)];
            for (Eigen::Index c = 0; c < nind; ++c) {
                double dv = 0.0;
                if (b.from >= n) dv += from_currents_(b.from - n, c);
                if (b.to >= n) dv -= from_currents_(b.to - n, c);
                a(j, c) = b.inv_l * dv;
            }
            a(j, j) -= b.inv_l * b.r;
        }
        const Eigen::EigenSolver<Eigen::MatrixXd> eig(a, false);
        stiffest_ = eig.eigenvalues().cwiseAbs().maxCoeff();
    }
}

double DynamicNetwork::node_voltage_component(int node, int component, std::span<const AlphaBetaVec> inverter_v,
                                              const std::vector<AlphaBetaVec>& load_v) const {
    if (node < 0) return 0.0;
    const auto n = static_cast<int>(inverter_count_);
    const AlphaBetaVec& v = node < n ? inverter_v[static_cast<std::size_t>(node)]
                                     : load_v[static_cast<std::size_t>(node - n)];
    return component == 0 ? v.a : v.b;
}

std::vector<AlphaBetaVec> DynamicNetwork::load_voltages(std::span<const AlphaBetaVec> inverter_voltages,
                                                        std::span<const AlphaBetaVec> branch_currents) const {
    std::vector<AlphaBetaVec> out(load_count_);
    for (std::size_t row = 0; row < load_count_; ++row) {
        AlphaBetaVec acc;
        const auto r = static_cast<Eigen::Index>(row);
        for (std::size_t j = 0; j < inductive_.size(); ++j)
            acc += from_currents_(r, static_cast<Eigen::Index>(j)) * branch_currents[inductive_[j].slot];
        for (std::size_t k = 0; k < inverter_count_; ++k)
            acc += from_sources_(r, static_cast<Eigen::Index>(k)) * inverter_voltages[k];
        out[row] = acc;
    }
    return out;
}

void DynamicNetwork::evaluate(std::span<const AlphaBetaVec> inverter_voltages,
                              std::span<const AlphaBetaVec> branch_currents,
                              std::span<AlphaBetaVec> d_branch_currents, std::span<AlphaBetaVec> injections) const {
    const std::vector<AlphaBetaVec> vl = load_voltages(inverter_voltages, branch_currents);
    const auto n = static_cast<int>(inverter_count_);
    auto node_v = [&](int node) -> AlphaBetaVec {
        return {node_voltage_component(node, 0, inverter_voltages, vl),
                node_voltage_component(node, 1, inverter_voltages, vl)};
    };

    std::fill(d_branch_currents.begin(), d_branch_currents.end(), AlphaBetaVec{});
    std::fill(injections.begin(), injections.end(), AlphaBetaVec{});
    for (const auto& b : inductive_) {
        const AlphaBetaVec i = branch_currents[b.slot];
        d_branch_currents[b.slot] = b.inv_l * (node_v(b.from) - node_v(b.to) - b.r * i);
        if (b.from >= 0 && b.from < n) injections[static_cast<std::size_t>(b.from)] += i;
        if (b.to >= 0 && b.to < n) injections[static_cast<std::size_t>(b.to)] -= i;
    }
    for (const auto& r : resistive_) {
        const AlphaBetaVec i = r.g * (node_v(r.from) - node_v(r.to));
        if (r.from >= 0 && r.from < n) injections[static_cast<std::size_t>(r.from)] += i;
        if (r.to >= 0 && r.to < n) injections[static_cast<std::size_t>(r.to)] -= i;
    }
}

double DynamicNetwork::stiffest_rate() const { return stiffest_; }

NetworkState dynamic_rhs(const Topology& topo, const NetworkState& state,
                         std::span<const AlphaBetaVec> inverter_voltages) {
    if (state.branch_currents.size() != topo.branches.size())
        throw ValidationError("network state must hold one current per topology branch");
    if (inverter_voltages.size() != topo.inverters.size())
        throw ValidationError("expected one voltage per inverter node");
    const DynamicNetwork net(topo);
    NetworkState out;
    out.branch_currents.resize(topo.branches.size());
    std::vector<AlphaBetaVec> injections(topo.inverters.size());
    net.evaluate(inverter_voltages, state.branch_currents, out.branch_currents, injections);
    return out;
}

Topology apply_event(const Topology& topo, const Event& event, std::vector<std::string>* log) {
    Topology next = topo;
    std::visit(
        [&](const auto& action) {
            using T = std::decay_t<decltype(action)>;
            if constexpr (std::is_same_v<T, BranchSwitch>) {
                const auto idx = find_branch(next, action.branch);
                if (!idx) throw ValidationError("event references unknown branch '" + action.branch + "'");
                next.branches[*idx].connected = action.close;
                if (!action.close && log) {
                    const auto before = unfed_loads(topo);
                    for (const auto& id : unfed_loads(next))
                        if (std::find(before.begin(), before.end(), id) == before.end())
                            log->push_back("opening branch '" + action.branch + "' islands load '" + id + "'");
                }
            } else if constexpr (std::is_same_v<T, LoadChange>) {
                const auto idx = find_load(next, action.load);
                if (!idx) throw ValidationError("event references unknown load '" + action.load + "'");
                if (!(action.g_siemens >= 0.0)) throw ValidationError("load conductance must be >= 0");
                next.loads[*idx].g_siemens = action.g_siemens;
            } else {
                if (!find_inverter(next, action.inverter))
                    throw ValidationError("event references unknown inverter '" + action.inverter + "'");
            }
        },
        event.action);
    return next;
}

}  // namespace dvoc
