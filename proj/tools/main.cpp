// Command-line front end. One JSON config in, machine-readable artifacts out:
//
//   cascade   run a cascade of satellite bifurcations -> trace.json, trace.csv
//   criteria  evaluate the summability condition reports -> criteria.json
//   verify    run the built-in cross-check battery -> verify.json
//   render    escape-time image with cascade overlays -> render.ppm
//
// Exit codes: 0 success, 1 config error, 2 numerical failure. The env var
// CASCADE_PRECISION (decimal digits) overrides the config's precision.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "qcascade/cascade.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace qc = qcascade;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

struct RunConfig {
    qc::CascadeSpec spec;
    qc::GeometryConstants constants;
    int precision = qc::kBinary64Digits;  // decimal digits

    // criteria parameters
    std::vector<qc::BigFraction> sequence;  // empty -> fall back to spec.arguments
    double a = 0.6;
    double Q = 2.0;
    std::uint64_t tail_start = 0;  // k in the tail conditions
    std::uint64_t base_n = 0;      // 0 -> spec.base_period
    bool intro_form = false;

    // render parameters
    std::string mode = "parameter";
    double center_re = -0.75, center_im = 0.0;
    double width = 3.0;
    int px_w = 512, px_h = 512;
    int image_max_iter = 2048;
    double julia_re = 0.0, julia_im = 0.0;
    bool delta_circle = false;
    bool overlay = true;
};

void require_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) known = true;
        if (!known)
            throw ConfigError(std::string(section) + ": unknown key \"" + it.key() + "\"");
    }
}

double get_number(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + ": expected a number");
    return j.get<double>();
}

std::int64_t get_int(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ConfigError(what + ": expected an integer");
    if (j.is_number_unsigned() &&
        j.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        throw ConfigError(what + ": value out of range");
    return j.get<std::int64_t>();
}

bool get_bool(const json& j, const std::string& what) {
    if (!j.is_boolean()) throw ConfigError(what + ": expected a boolean");
    return j.get<bool>();
}

// int64 field that may arrive as a JSON integer or a decimal string.
std::int64_t get_int64_flexible(const json& j, const std::string& what) {
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        try {
            std::size_t used = 0;
            std::int64_t v = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(what + ": \"" + j.get<std::string>() + "\" is not a valid integer");
        }
    }
    return get_int(j, what);
}

std::uint64_t get_uint64_flexible(const json& j, const std::string& what) {
    if (j.is_string()) {
        const std::string& s = j.get_ref<const std::string&>();
        try {
            std::size_t used = 0;
            if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
            std::uint64_t v = std::stoull(s, &used);
            if (used != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(what + ": \"" + j.get<std::string>() + "\" is not a valid nonnegative integer");
        }
    }
    std::int64_t v = get_int(j, what);
    if (v < 0 && !j.is_number_unsigned()) throw ConfigError(what + ": must be nonnegative");
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    return static_cast<std::uint64_t>(v);
}

qc::BigInt get_bigint(const json& j, const std::string& what) {
    if (j.is_number_integer()) {
        if (j.is_number_unsigned()) return qc::BigInt(j.get<std::uint64_t>());
        return qc::BigInt(j.get<std::int64_t>());
    }
    if (!j.is_string()) throw ConfigError(what + ": expected an integer or a decimal string");
    const std::string& s = j.get_ref<const std::string&>();
    std::size_t i = (!s.empty() && (s[0] == '-' || s[0] == '+')) ? 1 : 0;
    if (i >= s.size()) throw ConfigError(what + ": empty integer string");
    for (; i < s.size(); ++i)
        if (s[i] < '0' || s[i] > '9')
            throw ConfigError(what + ": \"" + s + "\" is not a decimal integer");
    return qc::BigInt(s);
}

qc::RotationNumber parse_rotation(const json& j, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + ": expected an object {\"p\":..., \"q\":...}");
    require_keys(j, what.c_str(), {"p", "q"});
    if (!j.contains("p") || !j.contains("q"))
        throw ConfigError(what + ": both p and q are required");
    std::int64_t p = get_int64_flexible(j.at("p"), what + ".p");
    std::uint64_t q = get_uint64_flexible(j.at("q"), what + ".q");
    return qc::RotationNumber(p, q);  // validates reduced form and range
}

// Fraction with unbounded denominator; {"q_pow2": e} stands for q = 2^e.
qc::BigFraction parse_big_fraction(const json& j, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + ": expected an object {\"p\":..., \"q\":...}");
    require_keys(j, what.c_str(), {"p", "q", "q_pow2"});
    if (!j.contains("p")) throw ConfigError(what + ": p is required");
    if (j.contains("q") == j.contains("q_pow2"))
        throw ConfigError(what + ": exactly one of q, q_pow2 is required");
    qc::BigInt p = get_bigint(j.at("p"), what + ".p");
    if (j.contains("q_pow2"))
        return qc::BigFraction::pow2_den(std::move(p), get_bigint(j.at("q_pow2"), what + ".q_pow2"));
    return qc::BigFraction(std::move(p), get_bigint(j.at("q"), what + ".q"));
}

void parse_spec(const json& j, qc::CascadeSpec& spec) {
    if (!j.is_object()) throw ConfigError("spec: expected an object");
    require_keys(j, "spec", {"base_period", "arguments", "tol", "max_iter", "compute_orbits"});
    if (j.contains("base_period")) {
        std::int64_t n = get_int(j.at("base_period"), "spec.base_period");
        if (n < 1 || n > std::numeric_limits<int>::max())
            throw ConfigError("spec.base_period: must be a positive integer");
        spec.base_period = static_cast<int>(n);
    }
    if (j.contains("arguments")) {
        const json& arr = j.at("arguments");
        if (!arr.is_array()) throw ConfigError("spec.arguments: expected an array of fractions");
        spec.arguments.clear();
        for (std::size_t i = 0; i < arr.size(); ++i)
            spec.arguments.push_back(
                parse_rotation(arr[i], "spec.arguments[" + std::to_string(i) + "]"));
    }
    if (j.contains("tol")) {
        spec.tol = get_number(j.at("tol"), "spec.tol");
        if (!(spec.tol > 0)) throw ConfigError("spec.tol: must be positive");
    }
    if (j.contains("max_iter")) {
        std::int64_t v = get_int(j.at("max_iter"), "spec.max_iter");
        if (v < 1 || v > 100000) throw ConfigError("spec.max_iter: out of range");
        spec.max_iter = static_cast<int>(v);
    }
    if (j.contains("compute_orbits"))
        spec.compute_orbits = get_bool(j.at("compute_orbits"), "spec.compute_orbits");
}

void parse_constants(const json& j, qc::GeometryConstants& g) {
    if (!j.is_object()) throw ConfigError("constants: expected an object");
    require_keys(j, "constants", {"B0", "A", "K", "beta", "delta", "L_budget"});
    if (j.contains("B0")) g.B0 = get_number(j.at("B0"), "constants.B0");
    if (j.contains("A")) g.A = get_number(j.at("A"), "constants.A");
    if (j.contains("K")) g.K = get_number(j.at("K"), "constants.K");
    if (j.contains("beta")) g.beta = get_number(j.at("beta"), "constants.beta");
    if (j.contains("delta")) g.delta = get_number(j.at("delta"), "constants.delta");
    if (j.contains("L_budget")) g.L_budget = get_number(j.at("L_budget"), "constants.L_budget");
    try {
        g.validate();
    } catch (const qc::ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

void parse_criteria_params(const json& j, RunConfig& cfg) {
    if (!j.is_object()) throw ConfigError("criteria: expected an object");
    require_keys(j, "criteria", {"sequence", "a", "Q", "k", "n", "intro_form"});
    if (j.contains("sequence")) {
        const json& arr = j.at("sequence");
        if (!arr.is_array()) throw ConfigError("criteria.sequence: expected an array of fractions");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            try {
                cfg.sequence.push_back(
                    parse_big_fraction(arr[i], "criteria.sequence[" + std::to_string(i) + "]"));
            } catch (const qc::ArgumentError& e) {
                throw ConfigError("criteria.sequence[" + std::to_string(i) + "]: " + e.what());
            }
        }
    }
    if (j.contains("a")) cfg.a = get_number(j.at("a"), "criteria.a");
    if (j.contains("Q")) cfg.Q = get_number(j.at("Q"), "criteria.Q");
    if (j.contains("k")) cfg.tail_start = get_uint64_flexible(j.at("k"), "criteria.k");
    if (j.contains("n")) {
        cfg.base_n = get_uint64_flexible(j.at("n"), "criteria.n");
        if (cfg.base_n == 0) throw ConfigError("criteria.n: must be positive");
    }
    if (j.contains("intro_form")) cfg.intro_form = get_bool(j.at("intro_form"), "criteria.intro_form");
}

void parse_pair(const json& j, const std::string& what, double& x, double& y) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError(what + ": expected [re, im]");
    x = get_number(j[0], what + "[0]");
    y = get_number(j[1], what + "[1]");
}

void parse_render_params(const json& j, RunConfig& cfg) {
    if (!j.is_object()) throw ConfigError("render: expected an object");
    require_keys(j, "render",
                 {"mode", "center", "width", "pixels", "max_iter", "julia_c", "delta_circle",
                  "overlay"});
    if (j.contains("mode")) {
        if (!j.at("mode").is_string()) throw ConfigError("render.mode: expected a string");
        cfg.mode = j.at("mode").get<std::string>();
        if (cfg.mode != "parameter" && cfg.mode != "julia")
            throw ConfigError("render.mode: must be \"parameter\" or \"julia\"");
    }
    if (j.contains("center")) parse_pair(j.at("center"), "render.center", cfg.center_re, cfg.center_im);
    if (j.contains("width")) {
        cfg.width = get_number(j.at("width"), "render.width");
        if (!(cfg.width > 0)) throw ConfigError("render.width: must be positive");
    }
    if (j.contains("pixels")) {
        const json& p = j.at("pixels");
        if (!p.is_array() || p.size() != 2) throw ConfigError("render.pixels: expected [w, h]");
        std::int64_t w = get_int(p[0], "render.pixels[0]");
        std::int64_t h = get_int(p[1], "render.pixels[1]");
        if (w < 1 || h < 1 || w > 8192 || h > 8192)
            throw ConfigError("render.pixels: dimensions must be within 1..8192");
        cfg.px_w = static_cast<int>(w);
        cfg.px_h = static_cast<int>(h);
    }
    if (j.contains("max_iter")) {
        std::int64_t v = get_int(j.at("max_iter"), "render.max_iter");
        if (v < 1 || v > 1000000) throw ConfigError("render.max_iter: out of range");
        cfg.image_max_iter = static_cast<int>(v);
    }
    if (j.contains("julia_c")) parse_pair(j.at("julia_c"), "render.julia_c", cfg.julia_re, cfg.julia_im);
    if (j.contains("delta_circle")) cfg.delta_circle = get_bool(j.at("delta_circle"), "render.delta_circle");
    if (j.contains("overlay")) cfg.overlay = get_bool(j.at("overlay"), "render.overlay");
}

RunConfig parse_config(const json& root, const std::string& command) {
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    require_keys(root, "config", {"command", "spec", "constants", "precision", "criteria", "render"});
    RunConfig cfg;
    if (root.contains("command")) {
        if (!root.at("command").is_string()) throw ConfigError("command: expected a string");
        std::string c = root.at("command").get<std::string>();
        if (c != command)
            throw ConfigError("command: config says \"" + c + "\" but the subcommand is \"" +
                              command + "\"");
    }
    if (root.contains("spec")) {
        try {
            parse_spec(root.at("spec"), cfg.spec);
        } catch (const qc::ArgumentError& e) {
            throw ConfigError(std::string("spec: ") + e.what());
        }
    }
    if (root.contains("constants")) parse_constants(root.at("constants"), cfg.constants);
    if (root.contains("precision")) {
        std::int64_t d = get_int(root.at("precision"), "precision");
        if (!qc::digits_supported(static_cast<int>(d)))
            throw ConfigError("precision: supported range is 1.." +
                              std::to_string(qc::kExtendedDigits) + " decimal digits");
        cfg.precision = static_cast<int>(d);
    }
    if (root.contains("criteria")) parse_criteria_params(root.at("criteria"), cfg);
    if (root.contains("render")) parse_render_params(root.at("render"), cfg);
    return cfg;
}

void apply_precision_env(RunConfig& cfg) {
    const char* env = std::getenv("CASCADE_PRECISION");
    if (!env || !*env) return;
    char* end = nullptr;
    long d = std::strtol(env, &end, 10);
    if (*end != '\0' || !qc::digits_supported(static_cast<int>(d)))
        throw ConfigError(std::string("CASCADE_PRECISION: \"") + env +
                          "\" is not a supported digit count");
    cfg.precision = static_cast<int>(d);
}

// ---------------------------------------------------------------------------
// JSON emission
// ---------------------------------------------------------------------------

json frac_json(const qc::RotationNumber& t) { return json{{"p", t.p}, {"q", t.q}}; }

json big_frac_json(const qc::BigFraction& t) {
    json j;
    j["p"] = t.p().str();
    if (t.den_is_pow2_form())
        j["q_pow2"] = t.den_raw().str();
    else
        j["q"] = t.den_raw().str();
    return j;
}

template <class Real>
json cx_json(const qc::Cx<Real>& z) {
    return json::array({qc::to_double(z.re), qc::to_double(z.im)});
}

json spec_json(const qc::CascadeSpec& s) {
    json args = json::array();
    for (const auto& t : s.arguments) args.push_back(frac_json(t));
    return json{{"base_period", s.base_period},
                {"arguments", std::move(args)},
                {"tol", s.tol},
                {"max_iter", s.max_iter},
                {"compute_orbits", s.compute_orbits}};
}

json constants_json(const qc::GeometryConstants& g) {
    return json{{"B0", g.B0},   {"A", g.A},         {"K", g.K},
                {"beta", g.beta}, {"delta", g.delta}, {"L_budget", g.L_budget}};
}

const char* kind_name(qc::ErrorKind k) {
    switch (k) {
        case qc::ErrorKind::diverged_orbit: return "diverged_orbit";
        case qc::ErrorKind::no_convergence: return "no_convergence";
        case qc::ErrorKind::singular_system: return "singular_system";
        case qc::ErrorKind::continuation_blocked: return "continuation_blocked";
        case qc::ErrorKind::clustering_ambiguous: return "clustering_ambiguous";
        case qc::ErrorKind::degenerate_cluster: return "degenerate_cluster";
        case qc::ErrorKind::sampling_too_coarse: return "sampling_too_coarse";
    }
    return "unknown";
}

json error_json(const qc::NumericError& e) {
    return json{{"kind", kind_name(e.kind())},
                {"message", e.what()},
                {"level", e.level()},
                {"residual", e.residual()},
                {"where", json::array({e.where().real(), e.where().imag()})}};
}

json report_json(const qc::ConditionReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) rows.push_back(row);  // NaN serializes as null
    json parts = json::array();
    for (const auto& p : r.parts)
        parts.push_back(json{{"name", p.name},
                             {"verdict", qc::to_string(p.verdict)},
                             {"margin", p.margin}});
    return json{{"name", r.name},       {"columns", r.columns}, {"rows", std::move(rows)},
                {"parts", std::move(parts)}, {"verdict", qc::to_string(r.verdict)},
                {"margin", r.margin},   {"note", r.note}};
}

void write_text(const fs::path& p, const std::string& body) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + p.string());
    f << body;
    f.flush();
    if (!f) throw ConfigError("write failed: " + p.string());
}

// ---------------------------------------------------------------------------
// cascade
// ---------------------------------------------------------------------------

template <class Real>
int cmd_cascade_impl(const RunConfig& cfg, const fs::path& out) {
    json doc;
    doc["command"] = "cascade";
    doc["precision"] = cfg.precision;
    doc["spec"] = spec_json(cfg.spec);
    doc["constants"] = constants_json(cfg.constants);

    qc::CascadeTrace<Real> trace;
    try {
        trace = qc::run_cascade<Real>(cfg.spec, cfg.constants);
    } catch (const qc::NumericError& e) {
        doc["error"] = error_json(e);
        write_text(out / "trace.json", doc.dump(2) + "\n");
        std::cerr << "cascade: numerical failure at level " << e.level() << ": " << e.what()
                  << "\n";
        return 2;
    }

    json comps = json::array();
    for (const auto& W : trace.components) {
        json lin = json::array();
        for (const auto& t : W.lineage) lin.push_back(frac_json(t));
        comps.push_back(json{{"period", W.period}, {"center", cx_json(W.center)},
                             {"lineage", std::move(lin)}});
    }
    doc["components"] = std::move(comps);

    json tps = json::array();
    for (const auto& c : trace.touch_points) tps.push_back(cx_json(c));
    doc["touch_points"] = std::move(tps);
    doc["periods"] = trace.periods;
    doc["limit"] = cx_json(trace.limit);
    doc["limit_error"] = trace.limit_error;
    doc["resolution_exhausted"] = trace.resolution_exhausted;

    json diags = json::array();
    for (const auto& d : trace.diagnostics)
        diags.push_back(json{{"gap", d.gap},
                             {"orbit_min_distance", d.orbit_min_dist},
                             {"zeta", d.zeta},
                             {"zeta_h_bound", d.zeta_h_bound},
                             {"cluster_count", d.cluster_count},
                             {"cluster_size", d.cluster_size},
                             {"cluster_max_diameter", d.cluster_max_diameter}});
    doc["diagnostics"] = std::move(diags);

    if (!trace.orbits_at_limit.empty()) {
        double floor_v = std::numeric_limits<double>::infinity();
        for (int m = 0; m < static_cast<int>(trace.orbits_at_limit.size()); ++m)
            floor_v = std::min(floor_v, qc::orbit_min_distance(trace, m));
        doc["orbit_distance_floor"] = floor_v;
        json orbs = json::array();
        for (const auto& o : trace.orbits_at_limit) {
            json pts = json::array();
            for (const auto& z : o.points) pts.push_back(cx_json(z));
            orbs.push_back(json{{"period", o.period},
                                {"multiplier", cx_json(o.multiplier)},
                                {"points", std::move(pts)}});
        }
        doc["orbits_at_limit"] = std::move(orbs);
    } else {
        doc["orbit_distance_floor"] = nullptr;
    }
    doc["mlc_rate"] = qc::mlc_rate_diagnostic(cfg.spec);

    write_text(out / "trace.json", doc.dump(2) + "\n");

    std::string csv =
        "m,period,touch_re,touch_im,gap,orbit_min_distance,zeta_max,zeta_h_bound,"
        "cluster_size,cluster_max_diameter\n";
    char buf[512];
    for (int m = 1; m <= trace.depth(); ++m) {
        const qc::LevelDiagnostics& d = trace.diagnostics[static_cast<std::size_t>(m - 1)];
        auto c = qc::to_std_complex(trace.touch_points[static_cast<std::size_t>(m - 1)]);
        std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n",
                      m, static_cast<long long>(trace.periods[static_cast<std::size_t>(m)]),
                      c.real(), c.imag(), d.gap, d.orbit_min_dist, d.zeta, d.zeta_h_bound,
                      d.cluster_size, d.cluster_max_diameter);
        csv += buf;
    }
    write_text(out / "trace.csv", csv);
    return 0;
}

int cmd_cascade(const RunConfig& cfg, const fs::path& out) {
    if (qc::precision_for_digits(cfg.precision) == qc::Precision::binary64)
        return cmd_cascade_impl<double>(cfg, out);
    return cmd_cascade_impl<qc::ExtReal>(cfg, out);
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

int cmd_criteria(const RunConfig& cfg, const fs::path& out) {
    std::vector<qc::BigFraction> ts = cfg.sequence;
    if (ts.empty()) ts = qc::to_big(cfg.spec.arguments);
    if (ts.empty())
        throw ConfigError("criteria: no sequence given (criteria.sequence or spec.arguments)");
    std::uint64_t n = cfg.base_n ? cfg.base_n : static_cast<std::uint64_t>(cfg.spec.base_period);
    std::size_t k = static_cast<std::size_t>(cfg.tail_start);

    json doc;
    doc["command"] = "criteria";
    json seq = json::array();
    for (const auto& t : ts) seq.push_back(big_frac_json(t));
    doc["sequence"] = std::move(seq);
    doc["params"] = json{{"a", cfg.a}, {"Q", cfg.Q}, {"k", cfg.tail_start},
                         {"n", n},     {"intro_form", cfg.intro_form}};
    doc["constants"] = constants_json(cfg.constants);

    json reports;
    reports["milnor"] = report_json(qc::milnor_series(ts));
    reports["theorem2"] = report_json(qc::theorem2_condition(ts, cfg.a, cfg.Q));
    reports["theorem5"] = report_json(qc::theorem5_conditions(ts, k, cfg.constants, cfg.intro_form));
    reports["lemma"] = report_json(qc::lemma_quantities(ts, n, cfg.constants));
    doc["reports"] = std::move(reports);

    write_text(out / "criteria.json", doc.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckRow {
    std::string name;
    bool hard = true;
    bool pass = false;
    double margin = 0;
    std::string detail;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// The multiplier of the fixed point continued from the attracting one inside
// the main cardioid, followed along a segment from the 1/3 internal ray to c.
// The argument is accumulated leg by leg, so the returned imaginary part is
// the continued branch, not the principal one.
std::complex<double> tracked_fixed_log_multiplier(std::complex<double> c_target) {
    const double pi = 3.14159265358979323846;
    std::complex<double> rho_s = std::polar(0.999, 2.0 * pi / 3.0);
    std::complex<double> c_s = rho_s / 2.0 - rho_s * rho_s / 4.0;
    std::complex<double> prev = rho_s;
    double arg_acc = std::arg(rho_s);
    const int steps = 256;
    for (int k = 1; k <= steps; ++k) {
        double s = static_cast<double>(k) / steps;
        std::complex<double> c = c_s + (c_target - c_s) * s;
        std::complex<double> rt = std::sqrt(1.0 - 4.0 * c);
        std::complex<double> r1 = 1.0 - rt, r2 = 1.0 + rt;
        std::complex<double> rho = std::abs(r1 - prev) <= std::abs(r2 - prev) ? r1 : r2;
        arg_acc += std::arg(rho / prev);
        prev = rho;
    }
    return {std::log(std::abs(prev)), arg_acc};
}

int cmd_verify(const RunConfig& cfg, const fs::path& out) {
    std::vector<CheckRow> rows;
    const double tol = cfg.spec.tol;
    const int max_iter = cfg.spec.max_iter;
    const qc::GeometryConstants& constants = cfg.constants;
    qc::HyperbolicComponent<double> cardioid{1, qc::Cx<double>(0.0, 0.0), {}};

    {
        CheckRow r{"cardioid_oracle", true, false, 0, ""};
        try {
            const qc::RotationNumber ts[] = {{1, 2}, {1, 3}, {-1, 3}, {1, 4},
                                             {-1, 4}, {1, 5}, {2, 5},  {3, 7}};
            double max_err = 0;
            for (const auto& t : ts) {
                auto [c, orbit] = qc::boundary_point(cardioid, t, tol, max_iter);
                std::complex<double> exact = qc::main_cardioid_boundary(t);
                max_err = std::max(max_err, std::abs(qc::to_std_complex(c) - exact));
            }
            r.pass = max_err <= 1e-10;
            r.margin = 1e-10 - max_err;
            r.detail = "max |solved - closed form| = " + fmt_double(max_err) +
                       " over 8 internal arguments";
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    {
        CheckRow r{"h_grid_bounds", true, false, 0, ""};
        try {
            double min_slack = std::numeric_limits<double>::infinity();
            double prev = -1;
            bool monotone = true;
            const double pi = 3.14159265358979323846;
            for (int i = 1; i <= 95; ++i) {
                double u = 0.01 * i;
                double h = qc::h_eval(u);
                if (!(h > prev)) monotone = false;
                prev = h;
                double upper = std::exp(-pi * pi / std::log(u)) / 16.0;
                min_slack = std::min({min_slack, h - 16.0 * u, upper - h});
            }
            r.pass = monotone && min_slack >= 0;
            r.margin = min_slack;
            r.detail = std::string(monotone ? "strictly increasing" : "monotonicity violated") +
                       "; min bound slack " + fmt_double(min_slack) + " on u = 0.01..0.95";
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    {
        CheckRow r{"satellite_derivative", true, false, 0, ""};
        try {
            double worst = 0;
            for (std::uint64_t q = 2; q <= 5; ++q) {
                qc::RotationNumber t0{1, q};
                double rr = qc::bifurcation_radius(t0, 1, constants);
                double h = rr / 200.0;
                const double pi = 3.14159265358979323846;
                std::complex<double> rho0 = std::polar(1.0, 2.0 * pi / static_cast<double>(q));
                auto lam = [&](std::complex<double> rho) {
                    qc::Cx<double> l = qc::satellite_multiplier(
                        cardioid, t0, qc::Cx<double>(rho.real(), rho.imag()), tol, constants,
                        max_iter);
                    return qc::to_std_complex(l);
                };
                std::complex<double> fd = (lam(rho0 + h) - lam(rho0 - h)) / (2.0 * h);
                std::complex<double> exact = -static_cast<double>(q * q) / rho0;
                worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
            }
            r.pass = worst <= 1e-4;
            r.margin = 1e-4 - worst;
            r.detail = "max relative error of central differences vs -q^2/rho_0 over q=2..5: " +
                       fmt_double(worst);
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    {
        CheckRow r{"covering_winding", true, false, 0, ""};
        try {
            double rr = qc::bifurcation_radius({1, 3}, 1, constants) / 4.0;
            bool ok = qc::covering_check(cardioid, qc::RotationNumber{1, 3}, rr, 4096, tol,
                                         max_iter);
            r.pass = ok;
            r.margin = ok ? 1.0 : -1.0;
            r.detail = "multiplier image of the circle |rho - rho_0| = " + fmt_double(rr) +
                       " winds once around 64 probes in the target disk";
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    {
        CheckRow r{"yoccoz_containment", true, false, 0, ""};
        try {
            qc::CascadeSpec spec;
            spec.arguments = {{1, 3}, {1, 8}, {1, 12}};
            spec.tol = tol;
            spec.max_iter = max_iter;
            spec.compute_orbits = false;
            qc::CascadeTrace<double> trace = qc::run_cascade<double>(spec, constants);
            std::vector<std::complex<double>> params;
            for (const auto& c : trace.touch_points) params.push_back(qc::to_std_complex(c));
            for (std::size_t i = 1; i < trace.components.size(); ++i)
                params.push_back(qc::to_std_complex(trace.components[i].center));
            qc::Disk Y = qc::yoccoz_circle({1, 3}, 1);
            double inflate = 1e-6 + 10.0 * tol;
            double min_margin = std::numeric_limits<double>::infinity();
            for (const auto& c : params) {
                std::complex<double> L = tracked_fixed_log_multiplier(c);
                min_margin = std::min(min_margin, Y.radius + inflate - std::abs(L - Y.center));
            }
            r.pass = params.size() >= 6 && min_margin >= 0;
            r.margin = min_margin;
            r.detail = std::to_string(params.size()) +
                       " parameters; min containment margin " + fmt_double(min_margin) +
                       " (disk inflated by " + fmt_double(inflate) + ")";
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    // Diagnostics: reported, never fatal. The cluster-scale comparison is
    // existential (the bound holds for SOME admissible constants), so both
    // sides are printed instead of enforced.
    {
        CheckRow r{"fast_decay_floor", false, false, 0, ""};
        try {
            qc::CascadeSpec spec;
            spec.arguments = {{1, 3}, {1, 8}, {1, 256}};
            spec.tol = tol;
            spec.max_iter = max_iter;
            qc::CascadeTrace<double> trace = qc::run_cascade<double>(spec, constants);
            double floor_v = std::numeric_limits<double>::infinity();
            for (int m = 0; m < static_cast<int>(trace.orbits_at_limit.size()); ++m)
                floor_v = std::min(floor_v, qc::orbit_min_distance(trace, m));
            r.pass = floor_v > 0.01;
            r.margin = floor_v - 0.01;
            r.detail = "orbit distance floor " + fmt_double(floor_v) +
                       " for the fast-decay cascade (1/3, 1/8, 1/256)";
            double zeta_worst = -std::numeric_limits<double>::infinity();
            for (const auto& d : trace.diagnostics)
                if (std::isfinite(d.zeta) && std::isfinite(d.zeta_h_bound))
                    zeta_worst = std::max(zeta_worst, d.zeta - d.zeta_h_bound);
            if (std::isfinite(zeta_worst))
                r.detail += "; max (zeta - H bound) = " + fmt_double(zeta_worst);
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    {
        CheckRow r{"doubling_contraction", false, false, 0, ""};
        try {
            qc::CascadeSpec spec;
            spec.arguments.assign(8, qc::RotationNumber{1, 2});
            spec.tol = tol;
            spec.max_iter = max_iter;
            qc::CascadeTrace<double> trace = qc::run_cascade<double>(spec, constants);
            double worst = 0;
            for (int m = 4; m + 1 < static_cast<int>(trace.orbits_at_limit.size()) && m <= 6;
                 ++m) {
                double ratio = qc::orbit_min_distance(trace, m + 1) /
                               qc::orbit_min_distance(trace, m);
                worst = std::max(worst, std::abs(ratio - 0.40));
            }
            r.pass = worst <= 0.04;
            r.margin = 0.04 - worst;
            r.detail = "orbit distance ratios within " + fmt_double(worst) +
                       " of 0.40 for the depth-8 doubling cascade; rate diagnostic " +
                       fmt_double(qc::mlc_rate_diagnostic(spec));
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        rows.push_back(r);
    }

    bool all_hard = true;
    for (const auto& r : rows)
        if (r.hard && !r.pass) all_hard = false;

    json doc;
    doc["command"] = "verify";
    doc["tol"] = tol;
    doc["constants"] = constants_json(constants);
    json checks = json::array();
    for (const auto& r : rows)
        checks.push_back(json{{"name", r.name},
                              {"hard", r.hard},
                              {"pass", r.pass},
                              {"margin", r.margin},
                              {"detail", r.detail}});
    doc["checks"] = std::move(checks);
    doc["all_hard_passed"] = all_hard;
    write_text(out / "verify.json", doc.dump(2) + "\n");

    if (!all_hard) {
        for (const auto& r : rows)
            if (r.hard && !r.pass)
                std::cerr << "verify: hard check failed: " << r.name << ": " << r.detail << "\n";
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct Image {
    int w = 0, h = 0;
    std::vector<unsigned char> rgb;

    void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        std::size_t i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                             static_cast<std::size_t>(x));
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
};

// Integer triangle-wave palette: deterministic across platforms, no float
// rounding in the color path.
void escape_color(int n, unsigned char* px) {
    auto tri = [](int v) {
        v %= 510;
        if (v < 0) v += 510;
        return static_cast<unsigned char>(v < 255 ? v : 510 - v);
    };
    px[0] = tri(n * 11 + 128);
    px[1] = tri(n * 7 + 64);
    px[2] = tri(n * 5 + 200);
}

void mark_cross(Image& img, int x, int y, int arm, unsigned char r, unsigned char g,
                unsigned char b) {
    for (int d = -arm; d <= arm; ++d) {
        img.set(x + d, y, r, g, b);
        img.set(x, y + d, r, g, b);
    }
}

void mark_square(Image& img, int x, int y, int half, unsigned char r, unsigned char g,
                 unsigned char b) {
    for (int dy = -half; dy <= half; ++dy)
        for (int dx = -half; dx <= half; ++dx) img.set(x + dx, y + dy, r, g, b);
}

template <class Real>
int cmd_render_impl(const RunConfig& cfg, const fs::path& out) {
    const int w = cfg.px_w, h = cfg.px_h;
    const double width = cfg.width;
    const double height = width * static_cast<double>(h) / static_cast<double>(w);
    const double x0 = cfg.center_re - width / 2.0;
    const double y1 = cfg.center_im + height / 2.0;  // top row
    const bool julia = cfg.mode == "julia";

    Image img{w, h, std::vector<unsigned char>(static_cast<std::size_t>(3) * w * h)};
    const std::complex<double> jc{cfg.julia_re, cfg.julia_im};

    for (int py = 0; py < h; ++py) {
        double im = y1 - (py + 0.5) * height / h;
        for (int px = 0; px < w; ++px) {
            double re = x0 + (px + 0.5) * width / w;
            double zr, zi, cr, ci;
            if (julia) {
                zr = re;
                zi = im;
                cr = jc.real();
                ci = jc.imag();
            } else {
                zr = 0;
                zi = 0;
                cr = re;
                ci = im;
            }
            int n = 0;
            while (n < cfg.image_max_iter && zr * zr + zi * zi <= 4.0) {
                double t = zr * zr - zi * zi + cr;
                zi = 2.0 * zr * zi + ci;
                zr = t;
                ++n;
            }
            unsigned char* px_ptr =
                &img.rgb[3 * (static_cast<std::size_t>(py) * static_cast<std::size_t>(w) +
                              static_cast<std::size_t>(px))];
            if (n >= cfg.image_max_iter && zr * zr + zi * zi <= 4.0) {
                px_ptr[0] = px_ptr[1] = px_ptr[2] = 0;
            } else {
                escape_color(n, px_ptr);
            }
        }
    }

    auto to_px = [&](std::complex<double> z, int& x, int& y) {
        x = static_cast<int>(std::floor((z.real() - x0) / width * w));
        y = static_cast<int>(std::floor((y1 - z.imag()) / height * h));
    };

    if (!julia && cfg.overlay && !cfg.spec.arguments.empty()) {
        qc::CascadeTrace<Real> trace;
        try {
            trace = qc::run_cascade<Real>(cfg.spec, cfg.constants);
        } catch (const qc::NumericError& e) {
            std::cerr << "render: cascade overlay failed at level " << e.level() << ": "
                      << e.what() << "\n";
            return 2;
        }
        int x, y;
        for (const auto& W : trace.components) {
            to_px(qc::to_std_complex(W.center), x, y);
            mark_square(img, x, y, 1, 255, 200, 0);
        }
        for (const auto& c : trace.touch_points) {
            to_px(qc::to_std_complex(c), x, y);
            mark_cross(img, x, y, 3, 255, 255, 255);
        }
    }

    if (julia && cfg.delta_circle) {
        int samples = 8 * std::max(w, h);
        const double pi = 3.14159265358979323846;
        int x, y;
        for (int k = 0; k < samples; ++k) {
            double th = 2.0 * pi * k / samples;
            to_px(std::polar(cfg.constants.delta, th), x, y);
            img.set(x, y, 255, 64, 64);
        }
    }

    std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::ofstream f(out / "render.ppm", std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + (out / "render.ppm").string());
    f << header;
    f.write(reinterpret_cast<const char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    f.flush();
    if (!f) throw ConfigError("write failed: " + (out / "render.ppm").string());
    return 0;
}

int cmd_render(const RunConfig& cfg, const fs::path& out) {
    if (qc::precision_for_digits(cfg.precision) == qc::Precision::binary64)
        return cmd_render_impl<double>(cfg, out);
    return cmd_render_impl<qc::ExtReal>(cfg, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for cascades of satellite bifurcations of z^2 + c"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    const char* names[] = {"cascade", "criteria", "verify", "render"};
    const char* descs[] = {"run a bifurcation cascade, write trace.json and trace.csv",
                           "evaluate the summability condition reports, write criteria.json",
                           "run the built-in cross-check battery, write verify.json",
                           "render an escape-time image, write render.ppm"};
    for (int i = 0; i < 4; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", config_path, "path to the JSON run configuration")
            ->required();
        sub->add_option("--out", out_dir, "output directory (created if absent)")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ConfigError("cannot read config file: " + config_path);
        json raw = json::parse(in, nullptr, false);
        if (raw.is_discarded()) throw ConfigError("config is not valid JSON: " + config_path);

        RunConfig cfg = parse_config(raw, command);
        apply_precision_env(cfg);

        fs::path out(out_dir);
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw ConfigError("cannot create output directory: " + out.string());

        if (command == "cascade") return cmd_cascade(cfg, out);
        if (command == "criteria") return cmd_criteria(cfg, out);
        if (command == "verify") return cmd_verify(cfg, out);
        return cmd_render(cfg, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const qc::ArgumentError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const qc::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
