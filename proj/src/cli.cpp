#include "dvoc/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "dvoc/analysis.hpp"
#include "dvoc/csv.hpp"
#include "dvoc/errors.hpp"
#include "dvoc/scenario.hpp"

namespace dvoc {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::ostringstream hex;
    for (unsigned int k = 0; k < len; ++k) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
    return hex.str();
}

struct Input {
    std::string source;  ///< builtin name or path as given
    std::string text;
    ScenarioFile file;
};

Input read_input(const std::string& name_or_path) {
    Input in;
    in.source = name_or_path;
    if (const auto builtin = builtin_scenario_text(name_or_path)) {
        in.text = std::string(*builtin);
    } else {
        std::ifstream f(name_or_path, std::ios::binary);
        if (!f) throw ValidationError("cannot read scenario '" + name_or_path + "' (not a file or built-in name)");
        std::ostringstream buf;
        buf << f.rdbuf();
        in.text = buf.str();
    }
    in.file = parse_scenario_text(in.text);
    return in;
}

struct Overrides {
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> network;
    std::optional<int> decimation;
};

void apply_overrides(ScenarioFile& file, const Overrides& o) {
    if (o.dt) file.config.dt = *o.dt;
    if (o.t_end) file.config.t_end = *o.t_end;
    if (o.seed) file.config.noise_seed = *o.seed;
    if (o.decimation) file.config.record_decimation = *o.decimation;
    if (o.network) {
        if (*o.network == "dynamic") file.config.network = NetworkModel::dynamic;
        else if (*o.network == "quasistatic") file.config.network = NetworkModel::quasistatic;
        else throw ValidationError("--network must be dynamic or quasistatic");
    }
    validate(file.config);
}

// Collected in memory and written only after every computation succeeded.
class OutputSet {
public:
    void add(std::string name, std::string content) { files_.emplace(std::move(name), std::move(content)); }

    void commit(const fs::path& dir) const {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message());
        for (const auto& [name, content] : files_) {
            const fs::path tmp = dir / (name + ".part");
            {
                std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
                if (!f) throw ValidationError("cannot write '" + tmp.string() + "'");
                f << content;
                if (!f) throw ValidationError("write failed for '" + tmp.string() + "'");
            }
            fs::rename(tmp, dir / name);
        }
    }

private:
    std::map<std::string, std::string> files_;
};

std::string manifest(const Input& in, const ScenarioFile& resolved, std::string_view command, const ojson& extra) {
    ojson m;
    m["manifest_version"] = 1;
    m["tool"] = "dvocsim";
    m["version"] = DVOC_VERSION;
    m["command"] = command;
    m["input"] = in.source;
    m["input_sha256"] = sha256_hex(in.text);
    m["seed"] = resolved.config.noise_seed;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    m["scenario"] = ojson::parse(serialize_scenario(resolved));
    return m.dump(2) + "\n";
}

std::string to_csv(void (*writer)(std::ostream&, const Trace&), const Trace& t) {
    std::ostringstream s;
    writer(s, t);
    return s.str();
}

std::vector<double> parse_range(const std::string& spec) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    if (parts.size() != 3) throw ValidationError("--range must look like a:b:n");
    double a = 0.0, b = 0.0;
    long n = 0;
    try {
        std::size_t used = 0;
        a = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("a");
        b = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("b");
        n = std::stol(parts[2], &used);
        if (used != parts[2].size()) throw std::invalid_argument("n");
    } catch (const std::logic_error&) {
        throw ValidationError("--range must look like a:b:n with numbers a, b and an integer n");
    }
    if (!std::isfinite(a) || !std::isfinite(b) || n < 1 || n > 100000)
        throw ValidationError("--range needs finite bounds and 1 <= n <= 100000");
    if (n > 1 && !(b > a)) throw ValidationError("--range needs b > a when n > 1");
    std::vector<double> grid;
    for (long k = 0; k < n; ++k) grid.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(k) / (n - 1));
    return grid;
}

const DvocParams& first_dvoc(const ScenarioFile& file) {
    const auto* p = std::get_if<DvocParams>(&file.scenario.inverters.front().controller);
    if (!p) throw ValidationError("this command needs a dVOC controller on the first inverter");
    return *p;
}

int cmd_simulate(const Input& in, ScenarioFile file, const fs::path& out_dir, std::ostream& out) {
    const Trace trace = run_scenario(file.scenario, file.config);
    const SyncMetrics metrics = compute_metrics(trace);
    OutputSet files;
    files.add("trace.csv", to_csv(write_trace_csv, trace));
    std::ostringstream m;
    write_metrics_csv(m, trace, metrics);
    files.add("metrics.csv", m.str());
    ojson log = ojson::array();
    for (const auto& line : trace.log) log.push_back(line);
    files.add("manifest.json", manifest(in, file, "simulate", {{"log", log}}));
    files.commit(out_dir);

    ojson summary;
    summary["status"] = "ok";
    summary["samples"] = trace.size();
    summary["settled"] = metrics.settled;
    summary["steady_freq_rad_s"] = metrics.steady_freq;
    summary["steady_p_w"] = metrics.steady_p;
    if (metrics.sync_time) summary["sync_time_s"] = *metrics.sync_time;
    out << summary.dump() << '\n';
    return 0;
}

int cmd_droop_sweep(const Input& in, ScenarioFile file, const fs::path& out_dir, const std::string& axis_name,
                    const std::string& range, unsigned threads, bool closed_only, std::ostream& out) {
    if (axis_name != "p" && axis_name != "q") throw ValidationError("--axis must be p or q");
    const DroopAxis axis = axis_name == "p" ? DroopAxis::p : DroopAxis::q;
    const std::vector<double> grid = parse_range(range);
    const DvocParams& prm = first_dvoc(file);

    std::vector<NamedCurve> curves;
    try {
        const ClosedFormSweep cf = droop_sweep_closed_form(prm, axis, grid);
        curves.push_back({"exact", cf.exact});
        curves.push_back({"approx", cf.approx});
        curves.push_back({"linearized", cf.linearized});
    } catch (const std::domain_error& e) {
        throw ValidationError(std::string("closed-form sweep: ") + e.what());
    }

    std::ostringstream metrics;
    metrics << "target,p,q,vmag,omega,settled,error\n";
    std::size_t settled = 0;
    if (!closed_only) {
        const SimulatedSweep sim = droop_sweep_simulated(file.scenario, axis, grid, file.config, threads);
        curves.push_back({"simulated", sim.curve});
        for (const auto& pt : sim.points) {
            metrics << format_double(pt.target) << ',' << format_double(pt.steady.p) << ','
                    << format_double(pt.steady.q) << ',' << format_double(pt.steady.vmag) << ','
                    << format_double(pt.steady.omega) << ',' << (pt.error.empty() ? 1 : 0) << ",\"" << pt.error
                    << "\"\n";
            settled += pt.error.empty() ? 1 : 0;
        }
    }
    std::ostringstream curve;
    write_curve_csv(curve, curves);

    OutputSet files;
    files.add("curve.csv", curve.str());
    if (!closed_only) files.add("metrics.csv", metrics.str());
    files.add("manifest.json", manifest(in, file, "droop-sweep",
                                        {{"axis", axis_name}, {"range", range}, {"closed_form_only", closed_only}}));
    files.commit(out_dir);
    out << ojson{{"status", "ok"}, {"points", grid.size()}, {"settled", settled}}.dump() << '\n';
    return 0;
}

int cmd_blackstart(const Input& in, ScenarioFile file, const fs::path& out_dir, std::ostream& out) {
    const DvocParams& prm = first_dvoc(file);
    const Trace trace = run_scenario(file.scenario, file.config);
    const BlackStartComparison cmp = blackstart_compare(trace, prm);
    const BlackStartCurve analytic =
        blackstart_analytic(trace.inverters.front().vmag.front(), prm, std::span<const double>(trace.time));

    std::ostringstream curve;
    curve << "t,vmag_simulated,vmag_analytic\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        curve << format_double(trace.time[i]) << ',' << format_double(trace.inverters.front().vmag[i]) << ','
              << format_double(analytic.magnitude[i]) << '\n';
    std::ostringstream metrics;
    metrics << "metric,value\n";
    metrics << "defined," << (cmp.defined ? 1 : 0) << '\n';
    metrics << "max_relative_deviation," << format_double(cmp.max_relative_deviation) << '\n';
    metrics << "rise_start," << format_double(cmp.rise_start) << '\n';
    metrics << "rise_end," << format_double(cmp.rise_end) << '\n';
    metrics << "h0," << format_double(analytic.h0) << '\n';

    OutputSet files;
    files.add("trace.csv", to_csv(write_trace_csv, trace));
    files.add("curve.csv", curve.str());
    files.add("metrics.csv", metrics.str());
    files.add("manifest.json", manifest(in, file, "blackstart-check", ojson::object()));
    files.commit(out_dir);

    ojson summary{{"status", "ok"}, {"defined", cmp.defined}};
    if (cmp.defined) summary["max_relative_deviation"] = cmp.max_relative_deviation;
    out << summary.dump() << '\n';
    return 0;
}

int cmd_consistency(const Input& in, ScenarioFile file, const fs::path& out_dir, double tolerance, bool after_events,
                    std::ostream& out) {
    std::vector<SetPoints> sps;
    for (const auto& inv : file.scenario.inverters) {
        if (const auto* d = std::get_if<DvocParams>(&inv.controller)) {
            sps.push_back(d->set_points());
        } else {
            const auto& dr = std::get<DroopParams>(inv.controller);
            sps.push_back({dr.p_star, dr.q_star, dr.v_star});
        }
    }
    Topology topo = file.scenario.topology;
    if (after_events) {
        for (const auto& e : file.scenario.events) {
            if (const auto* sc = std::get_if<SetPointChange>(&e.action)) {
                SetPoints& sp = sps.at(*find_inverter(topo, sc->inverter));
                sp.p_star = sc->p_star.value_or(sp.p_star);
                sp.q_star = sc->q_star.value_or(sp.q_star);
                sp.v_star = sc->v_star.value_or(sp.v_star);
            } else {
                topo = apply_event(topo, e);
            }
        }
    }
    const double omega = file.config.network_omega.value_or(omega0_of(file.scenario.inverters.front().controller));
    const ConsistencyReport rep = check_setpoint_consistency(topo, sps, omega, tolerance);

    std::ostringstream metrics;
    metrics << "metric,inverter,value\n";
    metrics << "status,," << to_string(rep.status) << '\n';
    metrics << "residual,," << format_double(rep.residual) << '\n';
    metrics << "residual_pu,," << format_double(rep.residual_pu) << '\n';
    metrics << "iterations,," << rep.iterations << '\n';
    for (std::size_t k = 0; k < rep.angles.size(); ++k) {
        const std::string& id = file.scenario.inverters[k].id;
        metrics << "angle," << id << ',' << format_double(rep.angles[k]) << '\n';
        metrics << "p," << id << ',' << format_double(rep.achieved[k].p) << '\n';
        metrics << "q," << id << ',' << format_double(rep.achieved[k].q) << '\n';
    }
    OutputSet files;
    files.add("metrics.csv", metrics.str());
    files.add("manifest.json",
              manifest(in, file, "consistency", {{"tolerance", tolerance}, {"after_events", after_events}}));
    files.commit(out_dir);
    out << ojson{{"status", to_string(rep.status)}, {"residual_pu", rep.residual_pu}}.dump() << '\n';
    return 0;
}

void report(std::ostream& err, const char* kind, const std::vector<std::string>& problems) {
    err << ojson{{"status", "error"}, {"kind", kind}, {"errors", problems}}.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulate dispatchable virtual oscillator controlled inverter networks", "dvocsim"};
    app.set_version_flag("--version", DVOC_VERSION);
    app.require_subcommand(1);

    std::string scenario;
    std::string out_dir;
    Overrides ov;
    std::string axis;
    std::string range;
    unsigned threads = 0;
    bool closed_only = false;
    double tolerance = 1e-6;
    bool after_events = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("scenario", scenario, "Built-in scenario name or scenario file")->required();
        sub->add_option("--out", out_dir, "Output directory")->required();
    };
    auto add_run = [&](CLI::App* sub) {
        sub->add_option("--dt", ov.dt, "Integration step, s");
        sub->add_option("--t-end", ov.t_end, "Simulated duration, s");
        sub->add_option("--seed", ov.seed, "Initial-angle and noise seed");
        sub->add_option("--network", ov.network, "dynamic or quasistatic");
        sub->add_option("--decimation", ov.decimation, "Record every n-th step");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Run a scenario and write trace, metrics and manifest");
    add_common(simulate);
    add_run(simulate);

    CLI::App* sweep = app.add_subcommand("droop-sweep", "Closed-form and simulated droop curves");
    add_common(sweep);
    add_run(sweep);
    sweep->add_option("--axis", axis, "p or q")->required();
    sweep->add_option("--range", range, "a:b:n grid of load power (p) or reactive power (q)")->required();
    sweep->add_option("--threads", threads, "Worker threads (0 = hardware)");
    sweep->add_flag("--closed-form-only", closed_only, "Skip the simulations");

    CLI::App* blackstart = app.add_subcommand("blackstart-check", "Compare a black start with the analytic rise");
    add_common(blackstart);
    add_run(blackstart);

    CLI::App* consistency = app.add_subcommand("consistency", "Check set-points against the power flow");
    add_common(consistency);
    consistency->add_option("--tolerance", tolerance, "Per-unit residual tolerance");
    consistency->add_flag("--after-events", after_events, "Check the topology and set-points left by all events");

    CLI::App* list = app.add_subcommand("list-scenarios", "Print the built-in scenario names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << DVOC_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        report(err, "validation", {e.what()});
        return 2;
    }

    try {
        if (list->parsed()) {
            for (const auto& name : builtin_scenario_names()) out << name << '\n';
            return 0;
        }
        const Input in = read_input(scenario);
        ScenarioFile file = in.file;
        if (!consistency->parsed()) apply_overrides(file, ov);
        if (simulate->parsed()) return cmd_simulate(in, file, out_dir, out);
        if (sweep->parsed()) return cmd_droop_sweep(in, file, out_dir, axis, range, threads, closed_only, out);
        if (blackstart->parsed()) return cmd_blackstart(in, file, out_dir, out);
        return cmd_consistency(in, file, out_dir, tolerance, after_events, out);
    } catch (const ValidationError& e) {
        report(err, "validation", e.problems());
        return 2;
    } catch (const NumericError& e) {
        report(err, "numeric", {e.what()});
        return 3;
    } catch (const std::exception& e) {
        report(err, "validation", {e.what()});
        return 2;
    }
}

}  // namespace dvoc
