#pragma once

// Study configuration, strict JSON parsing and dispatch for the htl command
// line tool. Exit codes: 0 success, 1 numerical failure, 2 configuration or
// input failure.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "htl/adaptive.hpp"
#include "htl/checks.hpp"
#include "htl/errors.hpp"
#include "htl/evaluate.hpp"
#include "htl/plot.hpp"

namespace htl::cli {

using json = nlohmann::json;

enum class Study { Rates, AdaptiveRates, Transfer, Phase, Fit, Selfcheck };

inline std::string_view to_string(Study s) {
    switch (s) {
        case Study::Rates: return "rates";
        case Study::AdaptiveRates: return "adaptive-rates";
        case Study::Transfer: return "transfer";
        case Study::Phase: return "phase";
        case Study::Fit: return "fit";
        case Study::Selfcheck: return "selfcheck";
    }
    return "?";
}

inline Study parse_study(std::string_view name) {
    for (const Study s : {Study::Rates, Study::AdaptiveRates, Study::Transfer, Study::Phase, Study::Fit,
                          Study::Selfcheck}) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("study", "unknown study '" + std::string(name) +
                                   "' (expected rates, adaptive-rates, transfer, phase, fit or selfcheck)");
}

struct FitSettings {
    std::string input;
    FilterKind filter = FilterKind::KRR;
    double C = 1.0;
    Eigen::Index grid_points = 1001;

    bool operator==(const FitSettings&) const = default;
};

/// Per-study sections keep their own defaults; only the section matching
/// `study` is read from or written to a document.
struct StudyConfig {
    Study study = Study::Selfcheck;
    std::string out_dir = "out";
    SimulationSettings sim;
    RateStudyConfig rates;
    TransferStudyConfig transfer;
    PhaseStudyConfig phase;
    FitSettings fit;

    bool operator==(const StudyConfig&) const = default;
};

/// Malformed JSON text; carries 1-based line and column.
class ParseError : public InputError {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : InputError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(column) +
                     ": " + what),
          line_(line),
          column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

namespace detail {

inline double get_real(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    return v.get<double>();
}

inline long long get_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        throw ConfigError(path, "integer out of range");
    }
    return v.get<long long>();
}

inline std::uint64_t get_u64(const json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline bool get_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
    return v.get<bool>();
}

inline std::string get_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    return v.get<std::string>();
}

inline FilterKind get_filter(const json& v, const std::string& path) {
    const std::string name = get_string(v, path);
    try {
        return parse_filter_kind(name);
    } catch (const InputError& e) {
        throw ConfigError(path, e.what());
    }
}

/// A scalar is accepted as a one-element list.
template <class Elem>
auto get_list(const json& v, const std::string& path, Elem elem) {
    using T = decltype(elem(v, path));
    std::vector<T> out;
    if (!v.is_array()) {
        out.push_back(elem(v, path));
        return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(elem(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline bool apply_common_key(StudyConfig& c, const std::string& key, const json& v) {
    SimulationSettings& s = c.sim;
    if (key == "study") return true;
    if (key == "seed_base") s.seed_base = get_u64(v, key);
    else if (key == "threads") s.threads = static_cast<int>(get_int(v, key));
    else if (key == "out_dir") c.out_dir = get_string(v, key);
    else if (key == "bandwidth") s.bandwidth = get_real(v, key);
    else if (key == "gp_bandwidth") s.gp_bandwidth = get_real(v, key);
    else if (key == "noise_sd") s.noise_sd = get_real(v, key);
    else if (key == "n_test") s.n_test = get_int(v, key);
    else if (key == "n_grid") s.n_grid = get_int(v, key);
    else if (key == "candidates") s.candidates = get_list(v, key, get_real);
    else if (key == "split_fraction") s.split_fraction = get_real(v, key);
    else if (key == "fixed_truth") s.fixed_truth = get_bool(v, key);
    else return false;
    return true;
}

inline bool apply_methods_key(TransferMethodSettings& m, const std::string& key, const json& v) {
    if (key == "C_source") m.C_source = get_real(v, key);
    else if (key == "C_shift") m.C_shift = get_real(v, key);
    else if (key == "C_target") m.C_target = get_real(v, key);
    else if (key == "source_filter") m.source_filter = get_filter(v, key);
    else if (key == "shift_filter") m.shift_filter = get_filter(v, key);
    else if (key == "target_filter") m.target_filter = get_filter(v, key);
    else return false;
    return true;
}

inline bool apply_study_key(StudyConfig& c, const std::string& key, const json& v) {
    switch (c.study) {
        case Study::Rates:
        case Study::AdaptiveRates: {
            RateStudyConfig& r = c.rates;
            if (key == "m") r.m = get_real(v, key);
            else if (key == "d") r.d = static_cast<int>(get_int(v, key));
            else if (key == "filters") r.filters = get_list(v, key, get_filter);
            else if (key == "ns") r.ns = get_list(v, key, get_int);
            else if (key == "repeats") r.repeats = static_cast<int>(get_int(v, key));
            else if (key == "C_grid") r.C_grid = get_list(v, key, get_real);
            else return false;
            return true;
        }
        case Study::Transfer: {
            TransferStudyConfig& t = c.transfer;
            if (apply_methods_key(t.methods, key, v)) return true;
            if (key == "m_P") t.m_P = get_real(v, key);
            else if (key == "m_delta") t.m_delta = get_list(v, key, get_real);
            else if (key == "xi") t.xi = get_list(v, key, get_real);
            else if (key == "n_Q") t.n_Q = get_list(v, key, get_int);
            else if (key == "n_P_exponent") t.n_P_exponent = get_real(v, key);
            else if (key == "repeats") t.repeats = static_cast<int>(get_int(v, key));
            else return false;
            return true;
        }
        case Study::Phase: {
            PhaseStudyConfig& p = c.phase;
            if (apply_methods_key(p.methods, key, v)) return true;
            if (key == "m_P") p.m_P = get_real(v, key);
            else if (key == "m_delta") p.m_delta = get_list(v, key, get_real);
            else if (key == "xi") p.xi = get_list(v, key, get_real);
            else if (key == "n_Q") p.n_Q = get_int(v, key);
            else if (key == "n_P") p.n_P = get_list(v, key, get_int);
            else if (key == "repeats") p.repeats = static_cast<int>(get_int(v, key));
            else return false;
            return true;
        }
        case Study::Fit: {
            FitSettings& f = c.fit;
            if (key == "input") f.input = get_string(v, key);
            else if (key == "filter") f.filter = get_filter(v, key);
            else if (key == "C") f.C = get_real(v, key);
            else if (key == "grid_points") f.grid_points = get_int(v, key);
            else return false;
            return true;
        }
        case Study::Selfcheck: return false;
    }
    return false;
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline json filter_names(const std::vector<FilterKind>& kinds) {
    json out = json::array();
    for (const FilterKind k : kinds) out.push_back(std::string(to_string(k)));
    return out;
}

}  // namespace detail

/// Checks the fields the dispatched study consumes. `fit.input` is checked at run time.
inline void validate(const StudyConfig& c) {
    validate_common(c.sim);
    if (c.out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
    switch (c.study) {
        case Study::Rates:
        case Study::AdaptiveRates: {
            RateStudyConfig r = c.rates;
            r.sim = c.sim;
            r.adaptive = c.study == Study::AdaptiveRates;
            htl::validate(r);
            break;
        }
        case Study::Transfer: {
            TransferStudyConfig t = c.transfer;
            t.sim = c.sim;
            htl::validate(t);
            break;
        }
        case Study::Phase: {
            PhaseStudyConfig p = c.phase;
            p.sim = c.sim;
            htl::validate(p);
            break;
        }
        case Study::Fit:
            if (!(c.fit.C > 0.0)) throw ConfigError("C", "must be positive");
            if (c.fit.grid_points < 2) throw ConfigError("grid_points", "must be >= 2");
            break;
        case Study::Selfcheck: break;
    }
}

/// Reads the study section selected by `study`, or by the `study` key when
/// `study` is empty. Unknown keys are rejected.
inline StudyConfig parse_config_object(const json& doc, std::optional<Study> study = std::nullopt) {
    if (!doc.is_object()) throw ConfigError("", "config document must be a JSON object");
    StudyConfig c;
    if (doc.contains("study")) {
        const Study named = parse_study(detail::get_string(doc["study"], "study"));
        if (study && *study != named) {
            throw ConfigError("study", "config names '" + std::string(to_string(named)) + "' but '" +
                                           std::string(to_string(*study)) + "' was requested");
        }
        c.study = named;
    } else if (study) {
        c.study = *study;
    } else {
        throw ConfigError("study", "missing");
    }
    for (const auto& [key, value] : doc.items()) {
        if (detail::apply_common_key(c, key, value)) continue;
        if (detail::apply_study_key(c, key, value)) continue;
        throw ConfigError(key, "unknown key for study '" + std::string(to_string(c.study)) + "'");
    }
    return c;
}

inline StudyConfig parse_config(std::string_view text, std::optional<Study> study = std::nullopt) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, column] = detail::line_column(text, e.byte);
        throw ParseError(line, column, e.what());
    }
    StudyConfig c = parse_config_object(doc, study);
    validate(c);
    return c;
}

/// Canonical document holding every key the study reads.
inline json to_json(const StudyConfig& c, bool include_runtime = true) {
    const SimulationSettings& s = c.sim;
    json j;
    j["study"] = std::string(to_string(c.study));
    j["seed_base"] = s.seed_base;
    if (include_runtime) {
        j["threads"] = s.threads;
        j["out_dir"] = c.out_dir;
    }
    j["bandwidth"] = s.bandwidth;
    j["gp_bandwidth"] = s.gp_bandwidth;
    j["noise_sd"] = s.noise_sd;
    j["n_test"] = s.n_test;
    j["n_grid"] = s.n_grid;
    j["candidates"] = s.candidates;
    j["split_fraction"] = s.split_fraction;
    j["fixed_truth"] = s.fixed_truth;
    auto methods = [&j](const TransferMethodSettings& m) {
        j["C_source"] = m.C_source;
        j["C_shift"] = m.C_shift;
        j["C_target"] = m.C_target;
        j["source_filter"] = std::string(to_string(m.source_filter));
        j["shift_filter"] = std::string(to_string(m.shift_filter));
        j["target_filter"] = std::string(to_string(m.target_filter));
    };
    switch (c.study) {
        case Study::Rates:
        case Study::AdaptiveRates:
            j["m"] = c.rates.m;
            j["d"] = c.rates.d;
            j["filters"] = detail::filter_names(c.rates.filters);
            j["ns"] = c.rates.ns;
            j["repeats"] = c.rates.repeats;
            j["C_grid"] = c.rates.C_grid;
            break;
        case Study::Transfer:
            j["m_P"] = c.transfer.m_P;
            j["m_delta"] = c.transfer.m_delta;
            j["xi"] = c.transfer.xi;
            j["n_Q"] = c.transfer.n_Q;
            j["n_P_exponent"] = c.transfer.n_P_exponent;
            j["repeats"] = c.transfer.repeats;
            methods(c.transfer.methods);
            break;
        case Study::Phase:
            j["m_P"] = c.phase.m_P;
            j["m_delta"] = c.phase.m_delta;
            j["xi"] = c.phase.xi;
            j["n_Q"] = c.phase.n_Q;
            j["n_P"] = c.phase.n_P;
            j["repeats"] = c.phase.repeats;
            methods(c.phase.methods);
            break;
        case Study::Fit:
            j["input"] = c.fit.input;
            j["filter"] = std::string(to_string(c.fit.filter));
            j["C"] = c.fit.C;
            j["grid_points"] = c.fit.grid_points;
            break;
        case Study::Selfcheck: break;
    }
    return j;
}

inline std::string serialize(const StudyConfig& c) { return to_json(c).dump(2) + "\n"; }

/// FNV-1a over the canonical document without thread count and output
/// directory, so the hash identifies what was computed.
inline std::string config_hash(const StudyConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char ch : to_json(c, false).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Two-column (x, y) records; an unparseable first line is taken as a header.
inline Dataset read_xy_csv(std::istream& is) {
    std::vector<double> xs;
    std::vector<double> ys;
    std::string line;
    std::size_t line_no = 0;
    auto parse = [](std::string_view field, double& out) {
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        if (!field.empty() && field.front() == '+') field.remove_prefix(1);
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
        return ec == std::errc{} && ptr == field.data() + field.size() && !field.empty();
    };
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::size_t comma = line.find(',');
        double x = 0.0;
        double y = 0.0;
        const bool ok = comma != std::string::npos && line.find(',', comma + 1) == std::string::npos &&
                        parse(std::string_view(line).substr(0, comma), x) &&
                        parse(std::string_view(line).substr(comma + 1), y);
        if (!ok) {
            if (xs.empty() && line_no == 1) continue;
            throw InputError("fit input: line " + std::to_string(line_no) + " is not an 'x,y' record");
        }
        if (!std::isfinite(x) || !std::isfinite(y)) {
            throw InputError("fit input: line " + std::to_string(line_no) + " has a non-finite value");
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    Dataset d;
    d.points = points_1d(Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())));
    d.labels = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return d;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    os << text;
    if (!os) throw InputError("failed writing " + path.string());
}

inline std::string csv_text(const std::vector<ResultRow>& rows, const std::string& hash) {
    std::ostringstream os;
    write_csv(os, rows, hash);
    return os.str();
}

inline std::vector<double> as_real(const std::vector<long long>& v) { return {v.begin(), v.end()}; }

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

}  // namespace detail

struct RunOutput {
    std::string csv;
    std::string svg;
    std::string summary;
};

/// Runs a simulation study and renders its artifacts without touching the filesystem.
inline RunOutput run_study(const StudyConfig& c) {
    const std::string hash = config_hash(c);
    RunOutput out;
    std::ostringstream summary;
    std::vector<PlotSeries> series;
    PlotSpec plot;
    plot.y_label = "mean excess risk";
    switch (c.study) {
        case Study::Rates:
        case Study::AdaptiveRates: {
            RateStudyConfig r = c.rates;
            r.sim = c.sim;
            r.adaptive = c.study == Study::AdaptiveRates;
            const RateStudyResult res = run_rate_study(r);
            out.csv = detail::csv_text(res.rows, hash);
            plot.title = std::string(r.adaptive ? "Adaptive" : "Non-adaptive") + " rates, m = " + detail::fmt(r.m);
            plot.x_label = "n";
            for (const auto& curve : res.curves) {
                series.push_back({std::string(to_string(curve.filter)) + " C=" + detail::fmt(curve.C),
                                  detail::as_real(curve.ns), curve.mean_risks});
                summary << to_string(curve.filter) << " C=" << curve.C;
                if (curve.fit) {
                    summary << " slope=" << curve.fit->slope << " theory=" << curve.fit->theoretical_slope
                            << " r2=" << curve.fit->r_squared;
                } else {
                    summary << " slope undefined";
                }
                summary << '\n';
            }
            for (std::size_t f = 0; f < res.best_curve.size(); ++f) {
                if (const auto& b = res.best_curve[f]) {
                    summary << "best " << to_string(res.curves[*b].filter) << ": C=" << res.curves[*b].C << '\n';
                }
            }
            break;
        }
        case Study::Transfer: {
            TransferStudyConfig t = c.transfer;
            t.sim = c.sim;
            const TransferStudyResult res = run_transfer_study(t);
            out.csv = detail::csv_text(res.rows, hash);
            plot.title = "Transfer vs target-only";
            plot.x_label = "n_Q";
            for (const auto& curve : res.curves) {
                const std::string tag = " xi=" + detail::fmt(curve.xi) + " m_delta=" + detail::fmt(curve.m_delta);
                series.push_back({"transfer" + tag, detail::as_real(curve.n_Q), curve.transfer_risk});
                series.push_back({"target-only" + tag, detail::as_real(curve.n_Q), curve.target_only_risk});
                summary << "xi=" << curve.xi << " m_delta=" << curve.m_delta;
                if (curve.transfer_fit) {
                    summary << " transfer slope=" << curve.transfer_fit->slope
                            << " theory=" << curve.transfer_fit->theoretical_slope;
                }
                if (curve.target_only_fit) summary << " target-only slope=" << curve.target_only_fit->slope;
                summary << '\n';
            }
            break;
        }
        case Study::Phase: {
            PhaseStudyConfig p = c.phase;
            p.sim = c.sim;
            const PhaseStudyResult res = run_phase_study(p);
            out.csv = detail::csv_text(res.rows, hash);
            plot.title = "Transfer risk vs n_P, n_Q = " + std::to_string(p.n_Q);
            plot.x_label = "n_P";
            for (const auto& curve : res.curves) {
                series.push_back({"xi=" + detail::fmt(curve.xi) + " m_delta=" + detail::fmt(curve.m_delta),
                                  detail::as_real(curve.n_P), curve.transfer_risk});
                summary << "xi=" << curve.xi << " m_delta=" << curve.m_delta << " risk(n_P last)/risk(n_P first)="
                        << curve.transfer_risk.back() / curve.transfer_risk.front() << '\n';
            }
            break;
        }
        case Study::Fit:
        case Study::Selfcheck: throw ConfigError("study", "not a simulation study");
    }
    out.svg = render_svg(plot, series);
    out.summary = summary.str();
    return out;
}

inline int run_fit(const StudyConfig& c, std::ostream& log) {
    if (c.fit.input.empty()) throw ConfigError("input", "fit needs an input CSV path");
    std::ifstream is(c.fit.input);
    if (!is) throw InputError("cannot open fit input '" + c.fit.input + "'");
    const Dataset data = read_xy_csv(is);
    if (data.size() < 4) throw InputError("fit input: need at least 4 records");

    AdaptiveConfig cfg;
    cfg.candidate_smoothness = c.sim.candidates;
    cfg.C = c.fit.C;
    cfg.split_fraction = c.sim.split_fraction;
    cfg.filter = c.fit.filter;
    const AdaptiveResult r = adaptive_fit(data, KernelSpec::gaussian(c.sim.bandwidth), cfg, c.sim.seed_base);

    const double lo = data.points.col(0).minCoeff();
    const double hi = data.points.col(0).maxCoeff();
    const Vector grid = equispaced(lo, hi > lo ? hi : lo + 1.0, c.fit.grid_points);
    const Vector pred = predict(r.model, points_1d(grid));
    std::ostringstream csv;
    csv << "x,prediction\n" << std::setprecision(17);
    for (Eigen::Index i = 0; i < grid.size(); ++i) csv << grid[i] << ',' << pred[i] << '\n';

    json summary;
    summary["n"] = data.size();
    summary["chosen_m"] = r.chosen_m;
    summary["chosen_lambda"] = r.chosen_lambda;
    summary["candidates"] = cfg.candidate_smoothness;
    summary["validation_errors"] = r.validation_errors;
    summary["config_hash"] = config_hash(c);

    const std::filesystem::path dir(c.out_dir);
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "fit.csv", csv.str());
    detail::write_text(dir / "fit.json", summary.dump(2) + "\n");
    log << "chosen m = " << r.chosen_m << ", lambda = " << std::setprecision(6) << r.chosen_lambda << '\n';
    log << "predictions written to " << (dir / "fit.csv").string() << '\n';
    return 0;
}

/// Validates, dispatches and writes artifacts; returns the exit code.
inline int run(const StudyConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        validate(c);
        if (c.study == Study::Selfcheck) {
            return checks::report(log, checks::invariant_suite()) ? 0 : 1;
        }
        if (c.study == Study::Fit) return run_fit(c, log);

        const RunOutput out = run_study(c);
        const std::filesystem::path dir(c.out_dir);
        std::filesystem::create_directories(dir);
        const std::string stem(to_string(c.study));
        detail::write_text(dir / (stem + ".csv"), out.csv);
        detail::write_text(dir / (stem + ".svg"), out.svg);
        detail::write_text(dir / (stem + "_summary.txt"), out.summary);
        detail::write_text(dir / (stem + "_config.json"), serialize(c));
        log << out.summary;
        log << "wrote " << (dir / (stem + ".csv")).string() << '\n';
        return 0;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "i/o error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace htl::cli
