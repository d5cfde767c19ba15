#include "dvoc/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dvoc/errors.hpp"

namespace dvoc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Walks one JSON object, recording every problem instead of stopping at the first.
class Reader {
public:
    Reader(const json& node, std::string path, std::vector<std::string>& errors)
        : node_(node), path_(std::move(path)), errors_(errors) {
        if (!node_.is_object()) fail("expected an object");
    }

    [[nodiscard]] bool ok() const { return node_.is_object(); }
    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] bool has(const char* key) const { return ok() && node_.contains(key); }

    void fail(const std::string& msg) const { errors_.push_back(path_ + ": " + msg); }
    void fail(const char* key, const std::string& msg) const { errors_.push_back(path_ + "." + key + ": " + msg); }

    std::optional<double> number(const char* key, bool required) {
        seen_.insert(key);
        if (!has(key)) {
            if (required) fail(key, "missing");
            return std::nullopt;
        }
        const json& v = node_.at(key);
        if (!v.is_number()) {
            fail(key, "expected a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!std::isfinite(x)) {
            fail(key, "must be finite");
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::string> string(const char* key, bool required) {
        seen_.insert(key);
        if (!has(key)) {
            if (required) fail(key, "missing");
            return std::nullopt;
        }
        const json& v = node_.at(key);
        if (!v.is_string()) {
            fail(key, "expected a string");
            return std::nullopt;
        }
        return v.get<std::string>();
    }

    std::optional<bool> boolean(const char* key) {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        if (!node_.at(key).is_boolean()) {
            fail(key, "expected true or false");
            return std::nullopt;
        }
        return node_.at(key).get<bool>();
    }

    std::optional<std::uint64_t> unsigned_int(const char* key) {
        seen_.insert(key);
        if (!has(key)) return std::nullopt;
        const json& v = node_.at(key);
        if (!v.is_number_unsigned()) {
            fail(key, "expected a non-negative integer");
            return std::nullopt;
        }
        return v.get<std::uint64_t>();
    }

    const json* array(const char* key, bool required) {
        seen_.insert(key);
        if (!has(key)) {
            if (required) fail(key, "missing");
            return nullptr;
        }
        if (!node_.at(key).is_array()) {
            fail(key, "expected an array");
            return nullptr;
        }
        return &node_.at(key);
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return has(key) ? &node_.at(key) : nullptr;
    }

    // Exactly one of two unit spellings, converted by `scale_b` for the second.
    std::optional<double> either(const char* a, const char* b, double scale_b, bool required) {
        const bool ha = has(a);
        const bool hb = has(b);
        if (ha && hb) {
            seen_.insert(a);
            seen_.insert(b);
            fail(std::string("give only one of ") + a + " and " + b);
            return std::nullopt;
        }
        if (hb) {
            const auto x = number(b, true);
            return x ? std::optional<double>(*x * scale_b) : std::nullopt;
        }
        if (ha) return number(a, true);
        seen_.insert(a);
        if (required) fail(std::string("missing ") + a + " (or " + b + ")");
        return std::nullopt;
    }

    void reject_unknown() const {
        if (!ok()) return;
        for (const auto& item : node_.items())
            if (!seen_.contains(item.key())) fail(item.key().c_str(), "unknown key");
    }

private:
    const json& node_;
    std::string path_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

std::string index_path(const std::string& base, std::size_t k) { return base + "[" + std::to_string(k) + "]"; }

double omega0_from(Reader& r, bool required) { return r.either("omega0_rad_s", "f0_hz", kTwoPi, required).value_or(0.0); }

// v_star_vpeak or v_star_vrms, stored as peak.
std::optional<double> v_star_from(Reader& r, bool required) {
    return r.either("v_star_vpeak", "v_star_vrms", kSqrt2, required);
}

InverterSpec parse_inverter(const json& node, const std::string& path, std::vector<std::string>& errors,
                            InverterNode& node_out) {
    Reader r(node, path, errors);
    InverterSpec spec{"", DroopParams{}, std::nullopt};
    if (!r.ok()) return spec;
    spec.id = r.string("id", true).value_or("");
    node_out.id = spec.id;
    node_out.c_farad = r.number("c_f_farad", false).value_or(0.0);
    const std::string kind = r.string("controller", false).value_or("dvoc");
    const double omega0 = omega0_from(r, true);
    const double v_star = v_star_from(r, true).value_or(0.0);
    const double p_star = r.number("p_star_w", false).value_or(0.0);
    const double q_star = r.number("q_star_var", false).value_or(0.0);

    if (kind == "dvoc") {
        DvocGains g;
        g.eta = r.number("eta_ohm_rad_s", true).value_or(0.0);
        g.alpha = r.number("alpha_siemens", true).value_or(0.0);
        g.kappa = r.number("kappa_rad", false).value_or(std::numbers::pi / 2.0);
        try {
            spec.controller = DvocParams(g, {p_star, q_star, v_star}, omega0);
        } catch (const ValidationError& e) {
            for (const auto& p : e.problems()) r.fail(p);
        }
    } else if (kind == "droop") {
        DroopParams d;
        d.kp = r.number("kp_rad_s_per_w", true).value_or(0.0);
        d.kq = r.number("kq_v_per_var", true).value_or(0.0);
        d.omega0 = omega0;
        d.v_star = v_star;
        d.p_star = p_star;
        d.q_star = q_star;
        try {
            validate(d);
        } catch (const ValidationError& e) {
            for (const auto& p : e.problems()) r.fail(p);
        }
        spec.controller = d;
    } else {
        r.fail("controller", "expected \"dvoc\" or \"droop\", got \"" + kind + "\"");
    }

    if (const json* init = r.child("initial")) {
        Reader ir(*init, path + ".initial", errors);
        if (ir.ok()) {
            PolarState s;
            const auto mag = ir.either("v0_vpeak", "v0_vrms", kSqrt2, true);
            if (mag && *mag < 0.0) ir.fail("initial magnitude must be >= 0");
            s.magnitude = mag.value_or(0.0);
            s.theta = ir.number("theta0_rad", false).value_or(0.0);
            spec.initial = s;
            ir.reject_unknown();
        }
    }
    r.reject_unknown();
    return spec;
}

LoadNode parse_load(const json& node, const std::string& path, std::vector<std::string>& errors) {
    Reader r(node, path, errors);
    LoadNode load;
    if (!r.ok()) return load;
    load.id = r.string("id", true).value_or("");
    const bool by_power = r.has("p_w") || r.has("v_rated_vrms") || r.has("v_rated_vpeak");
    if (by_power && r.has("g_siemens")) {
        r.fail("give either g_siemens or p_w with a rated voltage");
        r.number("g_siemens", false);
    }
    if (by_power) {
        const auto p = r.number("p_w", true);
        const auto v = r.either("v_rated_vpeak", "v_rated_vrms", kSqrt2, true);
        if (p && *p < 0.0) r.fail("p_w", "must be >= 0");
        if (v && *v <= 0.0) r.fail("rated voltage must be > 0");
        if (p && v && *v > 0.0) load.g_siemens = *p / (*v * *v);
    } else {
        load.g_siemens = r.number("g_siemens", false).value_or(0.0);
    }
    r.reject_unknown();
    return load;
}

Branch parse_branch(const json& node, const std::string& path, std::vector<std::string>& errors) {
    Reader r(node, path, errors);
    Branch b;
    if (!r.ok()) return b;
    b.id = r.string("id", true).value_or("");
    b.from = r.string("from", true).value_or("");
    b.to = r.string("to", true).value_or("");
    b.r_ohm = r.number("r_ohm", false).value_or(0.0);
    b.l_henry = r.number("l_henry", false).value_or(0.0);
    b.connected = r.boolean("connected").value_or(true);
    r.reject_unknown();
    return b;
}

std::optional<Event> parse_event(const json& node, const std::string& path, std::vector<std::string>& errors) {
    Reader r(node, path, errors);
    if (!r.ok()) return std::nullopt;
    Event e;
    const auto t = r.number("t_s", true);
    if (t && *t < 0.0) r.fail("t_s", "must be >= 0");
    e.time = t.value_or(0.0);
    const std::string type = r.string("type", true).value_or("");
    bool good = true;
    if (type == "connect" || type == "disconnect") {
        e.action = BranchSwitch{r.string("branch", true).value_or(""), type == "connect"};
    } else if (type == "load_step") {
        LoadChange lc;
        lc.load = r.string("load", true).value_or("");
        const bool by_power = r.has("p_w");
        if (by_power) {
            const auto p = r.number("p_w", true);
            const auto v = r.either("v_rated_vpeak", "v_rated_vrms", kSqrt2, true);
            if (p && *p < 0.0) r.fail("p_w", "must be >= 0");
            if (v && *v <= 0.0) r.fail("rated voltage must be > 0");
            if (p && v && *v > 0.0) lc.g_siemens = *p / (*v * *v);
            if (r.has("g_siemens")) {
                r.number("g_siemens", false);
                r.fail("give either g_siemens or p_w with a rated voltage");
            }
        } else {
            const auto g = r.number("g_siemens", true);
            if (g && *g < 0.0) r.fail("g_siemens", "must be >= 0");
            lc.g_siemens = g.value_or(0.0);
        }
        e.action = lc;
    } else if (type == "setpoint") {
        SetPointChange sc;
        sc.inverter = r.string("inverter", true).value_or("");
        sc.p_star = r.number("p_star_w", false);
        sc.q_star = r.number("q_star_var", false);
        sc.v_star = v_star_from(r, false);
        if (sc.v_star && *sc.v_star <= 0.0) r.fail("v_star must be > 0");
        if (!sc.p_star && !sc.q_star && !sc.v_star) r.fail("setpoint event changes nothing");
        e.action = sc;
    } else {
        if (!type.empty()) r.fail("type", "unknown event type \"" + type + "\"");
        good = false;
    }
    r.reject_unknown();
    return good ? std::optional<Event>(e) : std::nullopt;
}

SimConfig parse_sim(const json* node, std::vector<std::string>& errors) {
    SimConfig c;
    if (!node) return c;
    Reader r(*node, "sim", errors);
    if (!r.ok()) return c;
    c.dt = r.number("dt_s", false).value_or(c.dt);
    c.t_end = r.number("t_end_s", false).value_or(c.t_end);
    if (const auto net = r.string("network", false)) {
        if (*net == "dynamic") {
            c.network = NetworkModel::dynamic;
        } else if (*net == "quasistatic") {
            c.network = NetworkModel::quasistatic;
        } else {
            r.fail("network", "expected \"dynamic\" or \"quasistatic\"");
        }
    }
    if (const auto mode = r.string("controller_update", false)) {
        if (*mode == "sampled") {
            c.sampled_hz = r.number("sampled_hz", true);
        } else if (*mode != "continuous") {
            r.fail("controller_update", "expected \"continuous\" or \"sampled\"");
        } else if (r.has("sampled_hz")) {
            r.number("sampled_hz", false);
            r.fail("sampled_hz", "only meaningful with controller_update = \"sampled\"");
        }
    } else if (r.has("sampled_hz")) {
        c.sampled_hz = r.number("sampled_hz", true);
    }
    if (r.has("record_decimation")) {
        const auto d = r.unsigned_int("record_decimation");
        if (d && (*d < 1 || *d > 1'000'000'000)) r.fail("record_decimation", "must be in [1, 1e9]");
        if (d) c.record_decimation = static_cast<int>(std::min<std::uint64_t>(*d, 1'000'000'000));
    }
    c.noise_seed = r.unsigned_int("noise_seed").value_or(c.noise_seed);
    c.noise_amplitude = r.number("noise_amplitude", false).value_or(c.noise_amplitude);
    c.blackstart_fraction = r.number("blackstart_fraction", false).value_or(c.blackstart_fraction);
    c.network_omega = r.number("network_omega_rad_s", false);
    r.reject_unknown();
    return c;
}

ScenarioFile parse_document(const json& root) {
    std::vector<std::string> errors;
    ScenarioFile out;
    Reader r(root, "$", errors);
    if (!r.ok()) throw ValidationError(errors);

    out.scenario.name = r.string("name", false).value_or("unnamed");
    if (const json* invs = r.array("inverters", true)) {
        for (std::size_t k = 0; k < invs->size(); ++k) {
            InverterNode node;
            out.scenario.inverters.push_back(parse_inverter((*invs)[k], index_path("inverters", k), errors, node));
            out.scenario.topology.inverters.push_back(node);
        }
    }
    if (const json* loads = r.array("loads", false))
        for (std::size_t k = 0; k < loads->size(); ++k)
            out.scenario.topology.loads.push_back(parse_load((*loads)[k], index_path("loads", k), errors));
    if (const json* branches = r.array("branches", false))
        for (std::size_t k = 0; k < branches->size(); ++k)
            out.scenario.topology.branches.push_back(
                parse_branch((*branches)[k], index_path("branches", k), errors));
    if (const json* events = r.array("events", false)) {
        for (std::size_t k = 0; k < events->size(); ++k)
            if (auto e = parse_event((*events)[k], index_path("events", k), errors))
                out.scenario.events.push_back(std::move(*e));
    }
    out.config = parse_sim(r.child("sim"), errors);
    if (const json* outputs = r.array("outputs", false)) {
        for (std::size_t k = 0; k < outputs->size(); ++k) {
            const json& o = (*outputs)[k];
            const std::string s = o.is_string() ? o.get<std::string>() : std::string();
            if (s == "trace" || s == "metrics" || s == "curve") {
                out.outputs.push_back(s);
            } else {
                errors.push_back(index_path("outputs", k) + ": expected \"trace\", \"metrics\" or \"curve\"");
            }
        }
    } else {
        out.outputs = {"trace", "metrics"};
    }
    r.reject_unknown();

    // Semantic checks only make sense once the structure parsed cleanly.
    if (errors.empty()) {
        try {
            validate(out.scenario);
        } catch (const ValidationError& e) {
            for (const auto& p : e.problems()) errors.push_back(p);
        }
        try {
            validate(out.config);
        } catch (const ValidationError& e) {
            for (const auto& p : e.problems()) errors.push_back("sim: " + p);
        }
    }
    if (!errors.empty()) throw ValidationError(errors);
    return out;
}

ojson event_to_json(const Event& e) {
    ojson j;
    j["t_s"] = e.time;
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, BranchSwitch>) {
                j["type"] = a.close ? "connect" : "disconnect";
                j["branch"] = a.branch;
            } else if constexpr (std::is_same_v<T, LoadChange>) {
                j["type"] = "load_step";
                j["load"] = a.load;
                j["g_siemens"] = a.g_siemens;
            } else {
                j["type"] = "setpoint";
                j["inverter"] = a.inverter;
                if (a.p_star) j["p_star_w"] = *a.p_star;
                if (a.q_star) j["q_star_var"] = *a.q_star;
                if (a.v_star) j["v_star_vpeak"] = *a.v_star;
            }
        },
        e.action);
    return j;
}

}  // namespace

ScenarioFile parse_scenario_text(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON: ") + e.what());
    }
    if (root.is_object() && root.contains("manifest_version")) {
        if (!root.contains("scenario")) throw ValidationError("$: manifest without an embedded scenario");
        return parse_document(root.at("scenario"));
    }
    return parse_document(root);
}

ScenarioFile parse_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read scenario file '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

ScenarioFile load_scenario(std::string_view name_or_path) {
    if (const auto text = builtin_scenario_text(name_or_path)) return parse_scenario_text(*text);
    return parse_scenario_file(std::filesystem::path(std::string(name_or_path)));
}

std::string serialize_scenario(const ScenarioFile& file, int indent) {
    const Scenario& s = file.scenario;
    ojson root;
    root["name"] = s.name;
    ojson invs = ojson::array();
    for (std::size_t k = 0; k < s.inverters.size(); ++k) {
        const InverterSpec& spec = s.inverters[k];
        ojson j;
        j["id"] = spec.id;
        if (const auto* d = std::get_if<DvocParams>(&spec.controller)) {
            j["controller"] = "dvoc";
            j["eta_ohm_rad_s"] = d->eta();
            j["alpha_siemens"] = d->alpha();
            j["kappa_rad"] = d->kappa();
            j["p_star_w"] = d->p_star();
            j["q_star_var"] = d->q_star();
            j["v_star_vpeak"] = d->v_star();
            j["omega0_rad_s"] = d->omega0();
        } else {
            const auto& dr = std::get<DroopParams>(spec.controller);
            j["controller"] = "droop";
            j["kp_rad_s_per_w"] = dr.kp;
            j["kq_v_per_var"] = dr.kq;
            j["p_star_w"] = dr.p_star;
            j["q_star_var"] = dr.q_star;
            j["v_star_vpeak"] = dr.v_star;
            j["omega0_rad_s"] = dr.omega0;
        }
        const auto node = find_inverter(s.topology, spec.id);
        j["c_f_farad"] = node ? s.topology.inverters[*node].c_farad : 0.0;
        if (spec.initial) j["initial"] = {{"v0_vpeak", spec.initial->magnitude}, {"theta0_rad", spec.initial->theta}};
        invs.push_back(std::move(j));
    }
    root["inverters"] = std::move(invs);

    ojson loads = ojson::array();
    for (const auto& l : s.topology.loads) loads.push_back({{"id", l.id}, {"g_siemens", l.g_siemens}});
    root["loads"] = std::move(loads);

    ojson branches = ojson::array();
    for (const auto& b : s.topology.branches)
        branches.push_back({{"id", b.id},
                            {"from", b.from},
                            {"to", b.to},
                            {"r_ohm", b.r_ohm},
                            {"l_henry", b.l_henry},
                            {"connected", b.connected}});
    root["branches"] = std::move(branches);

    ojson events = ojson::array();
    for (const auto& e : s.events) events.push_back(event_to_json(e));
    root["events"] = std::move(events);

    const SimConfig& c = file.config;
    ojson sim;
    sim["dt_s"] = c.dt;
    sim["t_end_s"] = c.t_end;
    sim["network"] = c.network == NetworkModel::dynamic ? "dynamic" : "quasistatic";
    sim["controller_update"] = c.sampled_hz ? "sampled" : "continuous";
    if (c.sampled_hz) sim["sampled_hz"] = *c.sampled_hz;
    sim["record_decimation"] = c.record_decimation;
    sim["noise_seed"] = c.noise_seed;
    sim["noise_amplitude"] = c.noise_amplitude;
    sim["blackstart_fraction"] = c.blackstart_fraction;
    if (c.network_omega) sim["network_omega_rad_s"] = *c.network_omega;
    root["sim"] = std::move(sim);
    root["outputs"] = file.outputs;
    return root.dump(indent);
}

bool operator==(const ScenarioFile& x, const ScenarioFile& y) {
    return x.scenario == y.scenario && x.config == y.config && x.outputs == y.outputs;
}

}  // namespace dvoc
