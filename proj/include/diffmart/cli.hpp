#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "diffmart/classifier.hpp"
#include "diffmart/config.hpp"
#include "diffmart/simulate.hpp"

namespace diffmart {

using ordered_json = nlohmann::ordered_json;

// Extended reals in JSON: infinities and NaN have no literal, so they travel
// as the strings "inf" / "-inf" / "nan". Everything else is a plain number.
inline ordered_json json_real(double v) {
    if (std::isnan(v)) return "nan";
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

namespace cli {

inline ordered_json json_real_vec(const std::vector<double>& v) {
    ordered_json a = ordered_json::array();
    for (double x : v) a.push_back(json_real(x));
    return a;
}

inline std::string short_real(double v) {
    if (std::isnan(v)) return "nan";
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string pad(const std::string& s, std::size_t w) {
    return s.size() >= w ? s + "  " : s + std::string(w - s.size() + 2, ' ');
}

// ---------------------------------------------------------------- run config

struct DiffusionCliOpts {
    std::string family;
    std::vector<std::string> params;
    std::string config_path;
};

inline void add_diffusion_options(CLI::App* cmd, DiffusionCliOpts& o) {
    cmd->add_option("--family", o.family, "catalog family name");
    cmd->add_option("--param", o.params,
                    "family parameter as key=value (repeatable)");
    cmd->add_option("--config", o.config_path,
                    "JSON config file (diffusion, rates, simulation)");
}

struct RunConfig {
    DiffusionSpec diffusion;
    std::vector<double> rates;
    SimulationConfig simulation;
};

inline double parse_param_value(const std::string& kv, std::string& key) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("config: --param expects key=value, got '" + kv + "'");
    key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    try {
        std::size_t used = 0;
        const double v = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: parameter " + key + " has non-numeric value '" + val + "'");
    }
}

inline ordered_json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return ordered_json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
}

inline void apply_simulation_json(const ordered_json& j, SimulationConfig& cfg) {
    if (!j.is_object()) throw ConfigError("config: simulation must be an object");
    for (const auto& [k, v] : j.items()) {
        if (k == "initial_state") cfg.initial_state = v.get<double>();
        else if (k == "horizon") cfg.horizon = v.get<double>();
        else if (k == "step") cfg.step = v.get<double>();
        else if (k == "paths") cfg.paths = v.get<std::size_t>();
        else if (k == "seed") cfg.seed = v.get<std::uint64_t>();
        else if (k == "confidence") cfg.confidence = v.get<double>();
        else throw ConfigError("config: unknown simulation field " + k);
    }
}

// Resolution order: config file first, then explicit flags on top.
inline RunConfig resolve_run_config(const DiffusionCliOpts& o) {
    RunConfig rc;
    bool have_spec = false;
    if (!o.config_path.empty()) {
        const ordered_json j = load_json_file(o.config_path);
        if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
        for (const auto& [k, v] : j.items()) {
            (void)v;
            if (k != "diffusion" && k != "rates" && k != "simulation")
                throw ConfigError("config: unknown field " + k);
        }
        if (j.contains("diffusion")) {
            rc.diffusion = spec_from_json(j.at("diffusion"));
            have_spec = true;
        }
        if (j.contains("rates")) {
            if (!j.at("rates").is_array())
                throw ConfigError("config: rates must be an array of numbers");
            for (const auto& v : j.at("rates")) {
                if (!v.is_number()) throw ConfigError("config: rates must be numbers");
                rc.rates.push_back(v.get<double>());
            }
        }
        if (j.contains("simulation")) apply_simulation_json(j.at("simulation"), rc.simulation);
    }
    if (!o.family.empty()) {
        std::map<std::string, double> params;
        for (const auto& kv : o.params) {
            std::string key;
            const double v = parse_param_value(kv, key);
            params[key] = v;
        }
        rc.diffusion = catalog(o.family, params);
        have_spec = true;
    } else if (!o.params.empty()) {
        throw ConfigError("config: --param requires --family");
    }
    if (!have_spec)
        throw ConfigError("config: no diffusion given; pass --family or --config");
    return rc;
}

// ------------------------------------------------------------- json renders

inline ordered_json diffusion_json(const DiffusionSpec& spec) {
    ordered_json j;
    j["name"] = spec.name;
    j["interval"] = ordered_json::array(
        {json_real(spec.interval.alpha), json_real(spec.interval.beta)});
    j["reference_point"] = json_real(spec.reference_point);
    return j;
}

inline ordered_json verdict_json_integral(const ExtendedRealVerdict& v) {
    ordered_json j;
    j["diverged"] = v.diverged;
    j["value"] = json_real(v.diverged ? kInf : v.value);
    j["partial_sums"] = json_real_vec(v.partial_sums);
    j["truncation_points"] = json_real_vec(v.truncation_points);
    return j;
}

inline ordered_json boundary_json(const BoundaryClass& bc) {
    ordered_json j;
    j["side"] = side_name(bc.side);
    j["kind"] = boundary_kind_name(bc.kind);
    j["access_value"] = json_real(bc.access_value);
    j["nature_value"] = json_real(bc.nature_value);
    j["access"] = verdict_json_integral(bc.access);
    if (!bc.nature.truncation_points.empty()) j["nature"] = verdict_json_integral(bc.nature);
    return j;
}

inline ordered_json limit_json(const LimitEstimate& e) {
    ordered_json j;
    j["regime"] = limit_regime_name(e.regime);
    j["value"] = json_real(e.value);
    return j;
}

inline ordered_json diagnostics_json(const EndpointDiagnostics& d) {
    ordered_json j;
    j["side"] = side_name(d.side);
    j["base_rate"] = d.base_rate;
    j["companion_rate"] = d.companion_rate;
    j["rate_ratio"] = limit_json(d.rate_ratio);
    j["scale_affine_ratio"] = limit_json(d.scale_ratio);
    j["slope_ratio"] = limit_json(d.slope_ratio);
    j["scale_slope"] = limit_json(d.slope_magnitude);
    j["speed_integral"] = ordered_json{
        {"diverged", d.speed_integral.diverged},
        {"value", json_real(d.speed_integral.diverged ? kInf : d.speed_integral.value)}};
    j["implied_kind"] =
        d.implied_kind ? ordered_json(boundary_kind_name(*d.implied_kind)) : ordered_json(nullptr);
    return j;
}

inline ordered_json verdict_json(const MartingaleVerdict& v) {
    ordered_json j;
    j["process"] = process_kind_name(v.process);
    j["verdict"] = verdict_kind_name(v.verdict);
    if (v.initial_state_note)
        j["note"] = "started at the absorbing lower endpoint; the process is identically zero";
    return j;
}

inline ordered_json estimate_json(const EstimateWithCI& e) {
    ordered_json j;
    j["mean"] = json_real(e.mean);
    j["half_width"] = json_real(e.half_width);
    j["n_effective"] = e.n_effective;
    if (!e.warning.empty()) j["warning"] = e.warning;
    return j;
}

inline ordered_json simulation_json(const SimulationConfig& cfg) {
    ordered_json j;
    j["initial_state"] = json_real(cfg.initial_state);
    j["horizon"] = cfg.horizon;
    j["step"] = cfg.step;
    j["paths"] = cfg.paths;
    j["seed"] = cfg.seed;
    j["confidence"] = cfg.confidence;
    return j;
}

// -------------------------------------------------------------- text renders

inline std::string diffusion_line(const DiffusionSpec& spec) {
    return spec.name + " on (" + short_real(spec.interval.alpha) + ", " +
           short_real(spec.interval.beta) + "), reference point " +
           short_real(spec.reference_point);
}

inline std::string truncation_tail(const ExtendedRealVerdict& v) {
    if (v.truncation_points.empty()) return "-";
    const std::size_t n = v.truncation_points.size();
    return std::to_string(n) + (n == 1 ? " point to x = " : " points to x = ") +
           short_real(v.truncation_points.back());
}

inline std::string classify_text(const DiffusionSpec& spec, const BoundaryClass& a,
                                 const BoundaryClass& b) {
    std::ostringstream out;
    out << diffusion_line(spec) << "\n\n";
    out << pad("endpoint", 8) << pad("kind", 20) << pad("access", 10) << pad("nature", 10)
        << "truncation tail\n";
    for (const BoundaryClass* bc : {&a, &b}) {
        // prefer the nature ladder; a short-circuited one (single probe) says
        // less than the access march, so fall back in that case
        const auto& deep =
            bc->nature.truncation_points.size() >= 2 ? bc->nature : bc->access;
        out << pad(side_name(bc->side), 8) << pad(boundary_kind_name(bc->kind), 20)
            << pad(short_real(bc->access_value), 10) << pad(short_real(bc->nature_value), 10)
            << truncation_tail(deep) << "\n";
    }
    return out.str();
}

// Boundary kinds a diagnostic row's outcome is consistent with.
inline std::string row_points_to(const char* row, const LimitEstimate& e) {
    const bool scale_row = std::string(row) == "scale-affine ratio";
    switch (e.regime) {
        case LimitRegime::DivergesToInfinity:
            return scale_row ? "natural | accessible" : "natural";
        case LimitRegime::FinitePositive:
            return scale_row ? "entrance" : "entrance | accessible";
        default:
            return "-";
    }
}

inline std::string table_text(const DiffusionSpec& spec, const EndpointDiagnostics& d,
                              BoundaryKind classified) {
    std::ostringstream out;
    out << spec.name << " " << side_name(d.side) << ": rates " << short_real(d.base_rate)
        << " / " << short_real(d.companion_rate) << "\n";
    out << "  " << pad("diagnostic", 20) << pad("regime", 20) << pad("witness", 12)
        << "points to\n";
    auto row = [&](const char* name, const LimitEstimate& e) {
        out << "  " << pad(name, 20) << pad(limit_regime_name(e.regime), 20)
            << pad(short_real(e.value), 12) << row_points_to(name, e) << "\n";
    };
    row("rate ratio", d.rate_ratio);
    row("scale-affine ratio", d.scale_ratio);
    row("slope ratio", d.slope_ratio);
    row("scale slope", d.slope_magnitude);
    const bool div = d.speed_integral.diverged;
    out << "  " << pad("speed integral", 20) << pad(div ? "Diverges" : "Finite", 20)
        << pad(short_real(div ? kInf : d.speed_integral.value), 12)
        << (div ? "natural" : "entrance | accessible") << "\n";
    out << "  implied: "
        << (d.implied_kind ? boundary_kind_name(*d.implied_kind) : "none") << "; integral test: "
        << boundary_kind_name(classified) << "; agreement: "
        << (d.implied_kind && *d.implied_kind == classified ? "yes" : "NO") << "\n";
    return out.str();
}

inline std::string verdicts_text(const FullReport& rep) {
    std::ostringstream out;
    out << "  classification: alpha " << boundary_kind_name(rep.at_alpha.kind) << ", beta "
        << boundary_kind_name(rep.at_beta.kind) << "\n";
    for (const MartingaleVerdict* v :
         {&rep.phi_side_alpha, &rep.psi_side_beta, &rep.scale_process}) {
        out << "  " << pad(process_kind_name(v->process), 16) << verdict_kind_name(v->verdict);
        if (v->initial_state_note) out << "  (started at the absorbing endpoint: zero)";
        out << "\n";
    }
    return out.str();
}

// ------------------------------------------------------------- MC consistency

// Verdict string at the configured confidence: a deficit within 3 half-widths
// of zero is consistent with the martingale property, one beyond 5 half-widths
// certifies a strict deviation; the band between stays undecided.
inline std::string deficit_verdict(const EstimateWithCI& e) {
    if (std::abs(e.mean) <= 3.0 * e.half_width) return "martingale-consistent";
    if (e.mean > 5.0 * e.half_width) return "strict-consistent";
    return "inconclusive";
}

// Scale-process deficits are signed (submartingale up, supermartingale down);
// significance in either direction counts as strict.
inline std::string scale_deficit_verdict(const EstimateWithCI& e) {
    if (std::abs(e.mean) <= 3.0 * e.half_width) return "martingale-consistent";
    if (std::abs(e.mean) > 5.0 * e.half_width) return "strict-consistent";
    return "inconclusive";
}

inline bool theory_is_martingale(VerdictKind v) { return v == VerdictKind::Martingale; }

// Compares an MC deficit verdict with the boundary-theory verdict. A clean
// contradiction (theory martingale, MC certifies strict) is a numeric failure;
// an undecided MC result only degrades the exit code to inconclusive.
inline std::string mc_agreement(VerdictKind theory, const std::string& mc, bool& inconclusive) {
    const bool mart = theory_is_martingale(theory);
    if (mc == "martingale-consistent" && mart) return "consistent";
    if (mc == "strict-consistent" && !mart) return "consistent";
    if (mc == "strict-consistent" && mart)
        throw SolverError(std::string("Monte Carlo deficit certifies a strict deviation but the "
                                      "boundary analysis says ") +
                          verdict_kind_name(theory));
    inconclusive = true;
    return "undecided at this budget";
}

// ---------------------------------------------------------------- subcommands

struct CliIO {
    std::ostream& out;
    std::ostream& err;
};

inline int emit(CliIO io, bool as_json, const ordered_json& doc, const std::string& text) {
    if (as_json)
        io.out << doc.dump(2) << "\n";
    else
        io.out << text;
    return 0;
}

inline int cmd_classify(CliIO io, const RunConfig& rc, bool as_json) {
    ScaleSpeed ss(rc.diffusion);
    const BoundaryClass a = classify_boundary(ss, Side::alpha);
    const BoundaryClass b = classify_boundary(ss, Side::beta);
    ordered_json doc;
    doc["diffusion"] = diffusion_json(rc.diffusion);
    doc["endpoints"] = ordered_json::array({boundary_json(a), boundary_json(b)});
    return emit(io, as_json, doc, classify_text(rc.diffusion, a, b));
}

inline int cmd_solve(CliIO io, const RunConfig& rc, double r, const std::string& direction,
                     int nodes, double hull_alpha, double hull_beta, bool log_space) {
    if (direction != "increasing" && direction != "decreasing")
        throw ConfigError("config: --direction must be increasing or decreasing");
    ScaleSpeed ss(rc.diffusion);
    GridSpec gs;
    gs.node_count = nodes;
    // default hull: a plot-friendly margin rather than the deep diagnostic
    // one, so plain-space values stay printable for every catalog family
    const Compactifier comp(ss.interval());
    const double x0 = ss.x0();
    auto default_edge = [&](Side side) {
        const double g = std::min(0.05, 0.25 * comp.gap(x0, side));
        return comp.x_at_gap(g, side);
    };
    gs.hull_alpha = std::isnan(hull_alpha) ? default_edge(Side::alpha) : hull_alpha;
    gs.hull_beta = std::isnan(hull_beta) ? default_edge(Side::beta) : hull_beta;
    if (!log_space) gs.max_log_value = std::log(1e300);
    const Direction dir =
        direction == "increasing" ? Direction::increasing : Direction::decreasing;
    const ExcessiveFunction f = solve_excessive(ss, r, dir, gs);

    if (log_space)
        io.out << "x,p(x),log_value,log_abs_dvalue_dp\n";
    else
        io.out << "x,p(x),value,dvalue_dp\n";
    for (std::size_t j = 0; j < f.grid.size(); ++j) {
        io.out << format_double(f.grid[j]) << "," << format_double(f.scale_at_nodes[j]) << ",";
        if (log_space)
            io.out << format_double(f.log_values[j]) << ","
                   << format_double(f.log_abs_scale_derivative[j]) << "\n";
        else
            io.out << format_double(f.values[j]) << "," << format_double(f.scale_derivative[j])
                   << "\n";
    }
    return 0;
}

inline int cmd_table(CliIO io, const RunConfig& rc, double r, double s,
                     const std::string& side_str, bool as_json) {
    ScaleSpeed ss(rc.diffusion);
    std::vector<Side> sides;
    if (side_str == "alpha") sides = {Side::alpha};
    else if (side_str == "beta") sides = {Side::beta};
    else if (side_str == "both") sides = {Side::alpha, Side::beta};
    else throw ConfigError("config: --side must be alpha, beta, or both");

    ordered_json doc;
    doc["diffusion"] = diffusion_json(rc.diffusion);
    doc["sides"] = ordered_json::array();
    std::string text = diffusion_line(rc.diffusion) + "\n";
    for (Side side : sides) {
        const BoundaryClass bc = classify_boundary(ss, side);
        const EndpointDiagnostics d = diagnose_endpoint(ss, r, s, side);
        ordered_json js = diagnostics_json(d);
        js["classified_kind"] = boundary_kind_name(bc.kind);
        js["agreement"] = d.implied_kind && *d.implied_kind == bc.kind;
        doc["sides"].push_back(js);
        text += "\n" + table_text(rc.diffusion, d, bc.kind);
    }
    return emit(io, as_json, doc, text);
}

inline int cmd_verdict(CliIO io, const RunConfig& rc, std::vector<double> rates, bool as_json) {
    std::vector<DiscountRate> dr;
    for (double r : rates) dr.emplace_back(r);
    const FullReport rep = full_report(rc.diffusion, dr);
    ordered_json doc;
    doc["diffusion"] = diffusion_json(rc.diffusion);
    doc["classification"] = ordered_json{{"alpha", boundary_kind_name(rep.at_alpha.kind)},
                                         {"beta", boundary_kind_name(rep.at_beta.kind)}};
    doc["verdicts"] = ordered_json::array({verdict_json(rep.phi_side_alpha),
                                           verdict_json(rep.psi_side_beta),
                                           verdict_json(rep.scale_process)});
    const std::string text = diffusion_line(rc.diffusion) + "\n" + verdicts_text(rep);
    return emit(io, as_json, doc, text);
}

struct VerifyOutcome {
    ordered_json doc;
    std::string text;
    bool inconclusive = false;
};

inline VerifyOutcome run_verify(const RunConfig& rc, double r, double s, bool have_s,
                                Side side, const std::string& csv_path) {
    ScaleSpeed ss(rc.diffusion);
    SimulationConfig cfg = rc.simulation;
    if (std::isnan(cfg.initial_state)) cfg.initial_state = ss.x0();
    const Direction dir =
        side == Side::beta ? Direction::increasing : Direction::decreasing;
    const ExcessiveFunction f = solve_excessive(ss, r, dir, {});
    const EstimateWithCI deficit = martingale_deficit(f, cfg);
    const std::string verdict = deficit_verdict(deficit);

    VerifyOutcome res;
    res.inconclusive = verdict == "inconclusive";
    res.doc["diffusion"] = diffusion_json(rc.diffusion);
    res.doc["process"] = process_kind_name(side == Side::beta ? ProcessKind::psi_side_beta
                                                              : ProcessKind::phi_side_alpha);
    res.doc["rate"] = r;
    res.doc["simulation"] = simulation_json(cfg);
    res.doc["deficit"] = estimate_json(deficit);
    res.doc["verdict"] = verdict;

    std::ostringstream out;
    out << diffusion_line(rc.diffusion) << "\n";
    out << "process "
        << process_kind_name(side == Side::beta ? ProcessKind::psi_side_beta
                                                : ProcessKind::phi_side_alpha)
        << ", rate " << short_real(r) << "\n";
    out << "  simulation: x0 " << short_real(cfg.initial_state) << ", horizon "
        << short_real(cfg.horizon) << ", step " << short_real(cfg.step) << ", paths "
        << cfg.paths << ", seed " << cfg.seed << "\n";
    out << "  deficit " << short_real(deficit.mean) << " +- " << short_real(deficit.half_width)
        << "  (n = " << deficit.n_effective << ")\n";
    if (!deficit.warning.empty()) out << "  warning: " << deficit.warning << "\n";
    out << "  verdict: " << verdict << "\n";

    if (have_s) {
        const RatioIdentity ri = ratio_identity_check(ss, r, s, cfg.initial_state, cfg, side);
        const double gap_hw = std::abs(ri.rhs.mean - ri.lhs) / ri.rhs.half_width;
        ordered_json jr;
        jr["companion_rate"] = s;
        jr["lhs"] = json_real(ri.lhs);
        jr["rhs"] = estimate_json(ri.rhs);
        jr["truncation_bound"] = json_real(ri.truncation_bound);
        jr["gap_half_widths"] = json_real(gap_hw);
        res.doc["ratio_identity"] = jr;
        out << "  ratio identity: lhs " << short_real(ri.lhs) << ", rhs "
            << short_real(ri.rhs.mean) << " +- " << short_real(ri.rhs.half_width) << ", gap "
            << short_real(gap_hw) << " half-widths\n";
        if (gap_hw > 4.0) res.inconclusive = true;
        if (!csv_path.empty()) {
            std::ofstream csv(csv_path);
            if (!csv) throw ConfigError("config: cannot write CSV to " + csv_path);
            csv << "t,discounted_value_estimate\n";
            for (std::size_t j = 0; j < ri.times.size(); ++j)
                csv << format_double(ri.times[j]) << "," << format_double(ri.time_means[j])
                    << "\n";
            out << "  per-time estimates written to " << csv_path << "\n";
        }
    } else if (!csv_path.empty()) {
        throw ConfigError("config: --csv requires --s (per-time estimates come from the "
                          "ratio identity run)");
    }
    res.text = out.str();
    return res;
}

inline int cmd_verify(CliIO io, const RunConfig& rc, double r, double s, bool have_s,
                      const std::string& side_str, const std::string& csv_path, bool as_json) {
    Side side;
    if (side_str == "alpha") side = Side::alpha;
    else if (side_str == "beta") side = Side::beta;
    else throw ConfigError("config: --side must be alpha or beta");
    VerifyOutcome res = run_verify(rc, r, s, have_s, side, csv_path);
    emit(io, as_json, res.doc, res.text);
    return res.inconclusive ? 2 : 0;
}

inline int cmd_report(CliIO io, const RunConfig& rc, std::vector<double> rates, bool as_json) {
    std::vector<DiscountRate> dr;
    for (double r : rates) dr.emplace_back(r);
    const FullReport rep = full_report(rc.diffusion, dr);
    ScaleSpeed ss(rc.diffusion);

    SimulationConfig cfg = rc.simulation;
    if (std::isnan(cfg.initial_state)) cfg.initial_state = ss.x0();
    const double r0 = dr.front().r;
    const ExcessiveFunction phi = solve_excessive(ss, r0, Direction::decreasing, {});
    const ExcessiveFunction psi = solve_excessive(ss, r0, Direction::increasing, {});
    const EstimateWithCI d_phi = martingale_deficit(phi, cfg);
    const EstimateWithCI d_psi = martingale_deficit(psi, cfg);
    const EstimateWithCI d_scale = scale_deficit(ss, cfg);

    bool inconclusive = false;
    const std::string v_phi = deficit_verdict(d_phi);
    const std::string v_psi = deficit_verdict(d_psi);
    const std::string v_scale = scale_deficit_verdict(d_scale);
    const std::string a_phi = mc_agreement(rep.phi_side_alpha.verdict, v_phi, inconclusive);
    const std::string a_psi = mc_agreement(rep.psi_side_beta.verdict, v_psi, inconclusive);
    const std::string a_scale = mc_agreement(rep.scale_process.verdict, v_scale, inconclusive);

    ordered_json doc;
    doc["diffusion"] = diffusion_json(rc.diffusion);
    doc["classification"] = ordered_json{{"alpha", boundary_json(rep.at_alpha)},
                                         {"beta", boundary_json(rep.at_beta)}};
    doc["diagnostics"] = ordered_json::array();
    for (const auto& d : rep.diagnostics) doc["diagnostics"].push_back(diagnostics_json(d));
    doc["verdicts"] = ordered_json::array({verdict_json(rep.phi_side_alpha),
                                           verdict_json(rep.psi_side_beta),
                                           verdict_json(rep.scale_process)});
    auto mc_entry = [](const EstimateWithCI& e, const std::string& v, const std::string& a) {
        ordered_json j;
        j["deficit"] = estimate_json(e);
        j["verdict"] = v;
        j["agreement"] = a;
        return j;
    };
    doc["monte_carlo"] = ordered_json{{"simulation", simulation_json(cfg)},
                                      {"rate", r0},
                                      {"phi_side_alpha", mc_entry(d_phi, v_phi, a_phi)},
                                      {"psi_side_beta", mc_entry(d_psi, v_psi, a_psi)},
                                      {"scale_process", mc_entry(d_scale, v_scale, a_scale)}};

    std::ostringstream text;
    text << classify_text(rc.diffusion, rep.at_alpha, rep.at_beta) << "\n";
    for (const auto& d : rep.diagnostics) {
        const BoundaryKind k =
            d.side == Side::alpha ? rep.at_alpha.kind : rep.at_beta.kind;
        text << table_text(rc.diffusion, d, k) << "\n";
    }
    text << "verdicts\n" << verdicts_text(rep) << "\n";
    text << "monte carlo (rate " << short_real(r0) << ", horizon " << short_real(cfg.horizon)
         << ", paths " << cfg.paths << ")\n";
    auto mc_line = [&](const char* name, const EstimateWithCI& e, const std::string& v,
                       const std::string& a) {
        text << "  " << pad(name, 16) << "deficit " << short_real(e.mean) << " +- "
             << short_real(e.half_width) << "  " << v << " (" << a << ")\n";
    };
    mc_line("phi_side_alpha", d_phi, v_phi, a_phi);
    mc_line("psi_side_beta", d_psi, v_psi, a_psi);
    mc_line("scale_process", d_scale, v_scale, a_scale);

    emit(io, as_json, doc, text.str());
    return inconclusive ? 2 : 0;
}

} // namespace cli

// Entry point for the command-line binary. Exit codes: 0 conclusive output,
// 1 configuration/parse error, 2 inconclusive diagnostics, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"one-dimensional diffusion boundary and martingale toolkit"};
    app.require_subcommand(1);
    cli::CliIO io{out, err};

    cli::DiffusionCliOpts d_classify, d_solve, d_table, d_verdict, d_verify, d_report;
    bool j_classify = false, j_table = false, j_verdict = false, j_verify = false,
         j_report = false;

    auto* c_classify = app.add_subcommand("classify", "boundary classification at both endpoints");
    cli::add_diffusion_options(c_classify, d_classify);
    c_classify->add_flag("--json", j_classify, "machine-readable output");

    auto* c_solve = app.add_subcommand("solve", "solve one minimal excessive function, emit CSV");
    cli::add_diffusion_options(c_solve, d_solve);
    double so_r = 0.5;
    std::string so_dir = "increasing";
    int so_nodes = 2000;
    double so_ha = kNaN, so_hb = kNaN;
    bool so_log = false;
    c_solve->add_option("--r", so_r, "discount rate");
    c_solve->add_option("--direction", so_dir, "increasing or decreasing");
    c_solve->add_option("--nodes", so_nodes, "grid node count");
    c_solve->add_option("--hull-alpha", so_ha, "lower hull endpoint");
    c_solve->add_option("--hull-beta", so_hb, "upper hull endpoint");
    c_solve->add_flag("--log-space", so_log, "emit log values instead of plain");

    auto* c_table = app.add_subcommand("table", "endpoint diagnostic table");
    cli::add_diffusion_options(c_table, d_table);
    double ta_r = 0.5, ta_s = 0.0;
    std::string ta_side = "both";
    c_table->add_option("--r", ta_r, "base discount rate");
    auto* ta_s_opt =
        c_table->add_option("--s", ta_s, "companion rate (default: twice the base)");
    c_table->add_option("--side", ta_side, "alpha, beta, or both");
    c_table->add_flag("--json", j_table, "machine-readable output");

    auto* c_verdict = app.add_subcommand("verdict", "martingale verdicts for both sides");
    cli::add_diffusion_options(c_verdict, d_verdict);
    std::vector<double> ve_rates;
    c_verdict->add_option("--r", ve_rates, "discount rates (repeatable)");
    c_verdict->add_flag("--json", j_verdict, "machine-readable output");

    auto* c_verify = app.add_subcommand("verify", "Monte Carlo martingale verification");
    cli::add_diffusion_options(c_verify, d_verify);
    double vf_r = 0.5, vf_s = 0.0, vf_x0 = kNaN, vf_t = 1.0, vf_dt = 1e-3;
    std::size_t vf_paths = 10000;
    std::uint64_t vf_seed = 1;
    std::string vf_side = "beta", vf_csv;
    c_verify->add_option("--r", vf_r, "discount rate");
    auto* s_opt = c_verify->add_option("--s", vf_s, "companion rate; adds the ratio identity");
    auto* vf_x0_opt =
        c_verify->add_option("--x0", vf_x0, "start state (default: reference point)");
    auto* vf_t_opt = c_verify->add_option("--t", vf_t, "horizon");
    auto* vf_dt_opt = c_verify->add_option("--dt", vf_dt, "step size");
    auto* vf_paths_opt = c_verify->add_option("--paths", vf_paths, "path count");
    auto* vf_seed_opt = c_verify->add_option("--seed", vf_seed, "RNG seed");
    c_verify->add_option("--side", vf_side, "alpha (phi side) or beta (psi side)");
    c_verify->add_option("--csv", vf_csv, "write per-time estimates to this file");
    c_verify->add_flag("--json", j_verify, "machine-readable output");

    auto* c_report = app.add_subcommand("report", "full pipeline report");
    cli::add_diffusion_options(c_report, d_report);
    std::vector<double> re_rates;
    double re_t = 1.0, re_dt = 1e-3;
    std::size_t re_paths = 4000;
    std::uint64_t re_seed = 1;
    c_report->add_option("--r", re_rates, "discount rates (repeatable)");
    auto* re_t_opt = c_report->add_option("--t", re_t, "MC horizon");
    auto* re_dt_opt = c_report->add_option("--dt", re_dt, "MC step size");
    auto* re_paths_opt = c_report->add_option("--paths", re_paths, "MC path count");
    auto* re_seed_opt = c_report->add_option("--seed", re_seed, "MC RNG seed");
    c_report->add_flag("--json", j_report, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*c_classify)
            return cli::cmd_classify(io, cli::resolve_run_config(d_classify), j_classify);
        if (*c_solve)
            return cli::cmd_solve(io, cli::resolve_run_config(d_solve), so_r, so_dir, so_nodes,
                                  so_ha, so_hb, so_log);
        if (*c_table) {
            if (ta_s_opt->count() == 0) ta_s = 2.0 * ta_r;
            return cli::cmd_table(io, cli::resolve_run_config(d_table), ta_r, ta_s, ta_side,
                                  j_table);
        }
        if (*c_verdict) {
            cli::RunConfig rc = cli::resolve_run_config(d_verdict);
            if (!ve_rates.empty()) rc.rates = ve_rates;
            if (rc.rates.empty()) rc.rates = {0.5, 1.0};
            return cli::cmd_verdict(io, rc, rc.rates, j_verdict);
        }
        // explicit flags win; config-file values survive unset flags
        if (*c_verify) {
            cli::RunConfig rc = cli::resolve_run_config(d_verify);
            auto& sim = rc.simulation;
            if (vf_x0_opt->count() > 0) sim.initial_state = vf_x0;
            if (vf_t_opt->count() > 0 || std::isnan(sim.horizon)) sim.horizon = vf_t;
            if (vf_dt_opt->count() > 0 || std::isnan(sim.step)) sim.step = vf_dt;
            if (vf_paths_opt->count() > 0 || sim.paths == 0) sim.paths = vf_paths;
            if (vf_seed_opt->count() > 0 || sim.seed == 0) sim.seed = vf_seed;
            return cli::cmd_verify(io, rc, vf_r, vf_s, s_opt->count() > 0, vf_side, vf_csv,
                                   j_verify);
        }
        if (*c_report) {
            cli::RunConfig rc = cli::resolve_run_config(d_report);
            if (!re_rates.empty()) rc.rates = re_rates;
            if (rc.rates.empty()) rc.rates = {0.5, 1.0};
            auto& sim = rc.simulation;
            if (re_t_opt->count() > 0 || std::isnan(sim.horizon)) sim.horizon = re_t;
            if (re_dt_opt->count() > 0 || std::isnan(sim.step)) sim.step = re_dt;
            if (re_paths_opt->count() > 0 || sim.paths == 0) sim.paths = re_paths;
            if (re_seed_opt->count() > 0 || sim.seed == 0) sim.seed = re_seed;
            return cli::cmd_report(io, rc, rc.rates, j_report);
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const InconclusiveError& e) {
        err << "inconclusive: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

} // namespace diffmart
