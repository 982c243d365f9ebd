#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aniso/config.hpp"
#include "aniso/metric.hpp"

namespace aniso::cli {

/// Process exit codes.
enum Exit : int { ok = 0, config_error = 1, cover_error = 2, decomposition_error = 3 };

namespace fs = std::filesystem;

inline std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline Json num_json(double v) {
    if (std::isfinite(v)) return v;
    return num(v);
}

inline void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

inline std::vector<double> parse_point(const std::string& s, const char* flag) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            v.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ConfigError(std::string(flag) + ": '" + cell + "' is not a number");
        }
    }
    return v;
}

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> jmax;
    std::optional<double> tol;
    std::string x, y;
};

inline RunConfig load_with_overrides(const Flags& f) {
    if (f.config.empty()) throw ConfigError("--config is required");
    RunConfig c = load_config(f.config);
    if (f.seed) c.seed = *f.seed;
    if (f.jmax) {
        if (*f.jmax < 0) throw ConfigError("--jmax must be non-negative");
        c.decompose.j_max = *f.jmax;
    }
    if (!f.out.empty()) c.output.dir = f.out;
    return c;
}

inline Json profile_json(const MolecularProfile& pr) {
    return Json{{"p", pr.triple.p},
                {"q", num_json(pr.triple.q)},
                {"m", pr.triple.m},
                {"n_p", pr.triple.n_p},
                {"d", pr.d},
                {"d_threshold", pr.d_threshold},
                {"sigma", pr.sigma},
                {"alpha1", pr.alpha1},
                {"alpha2", pr.alpha2}};
}

// ---------------------------------------------------------------------------

inline int cmd_validate_cover(const Flags& f, std::ostream& out) {
    const RunConfig c = load_with_overrides(f);
    const CoverSpec spec = make_cover(c);
    const double tol = f.tol.value_or(1e-6);
    std::mt19937_64 rng(c.seed);
    const auto c1 = validate_c1(spec, sample_point_levels(spec, 1000, rng, -6.0, 6.0));
    const auto c2 = validate_c2(spec, sample_pairs(spec, 4000, rng, -5.0, 5.0, default_s_grid()), tol, tol);
    const auto zero = quasi_zero_uniform_check(spec, sample_pairs(spec, 1000, rng, 0.0, 0.0, {0.0}));
    std::vector<std::string> violations = c1.violations;
    violations.insert(violations.end(), c2.violations.begin(), c2.violations.end());
    int ell = 0;
    try {
        ell = choose_ell(spec, c.seed);
    } catch (const CoverDefect& e) {
        violations.push_back(e.what());
    }
    const auto& p = spec.params();
    Json rep;
    rep["cover"] = c.cover.kind;
    rep["dim"] = spec.dim();
    rep["seed"] = c.seed;
    rep["tolerance"] = tol;
    rep["declared"] = Json{{"a1", p.a1}, {"a2", p.a2}, {"a3", p.a3}, {"a4", p.a4}, {"a5", p.a5}, {"a6", p.a6}};
    rep["constants_declared"] = spec.constants_declared();
    rep["measured"] = Json{{"a1_hat", c1.a1_hat}, {"a2_hat", c1.a2_hat}, {"a3_hat", c2.a3_hat},
                           {"a4_hat", c2.a4_hat}, {"a5_hat", c2.a5_hat}, {"a6_hat", c2.a6_hat}};
    rep["zero_uniform"] = Json{{"c1_hat", zero.c1_hat}, {"c2_hat", zero.c2_hat}};
    rep["ell"] = ell;
    rep["violations"] = violations;
    rep["consistent"] = violations.empty();
    const std::string text = rep.dump(2) + "\n";
    out << text;
    if (!f.out.empty()) {
        fs::create_directories(f.out);
        write_text(fs::path(f.out) / "cover_report.json", text);
    }
    return violations.empty() ? ok : cover_error;
}

inline int cmd_rho(const Flags& f, std::ostream& out) {
    const RunConfig c = load_with_overrides(f);
    const CoverSpec spec = make_cover(c);
    const auto xv = parse_point(f.x, "--x"), yv = parse_point(f.y, "--y");
    if (static_cast<int>(xv.size()) != spec.dim() || static_cast<int>(yv.size()) != spec.dim())
        throw ConfigError("--x and --y need " + std::to_string(spec.dim()) + " coordinates");
    RhoOptions opt;
    opt.centers = c.decompose.rho_centers;
    const auto est = rho(spec, to_point(xv, spec.dim()), to_point(yv, spec.dim()), opt);
    Json rep{{"x", xv}, {"y", yv}, {"rho", num_json(est.value)}, {"t_star", num_json(est.level_t_star)}};
    if (!est.diagnostic.empty()) rep["diagnostic"] = est.diagnostic;
    out << rep.dump(2) << "\n";
    return ok;
}

inline int cmd_molecule_norm(const Flags& f, std::ostream& out) {
    const RunConfig c = load_with_overrides(f);
    const CoverSpec spec = make_cover(c);
    const QuadContext ctx = make_quad(c);
    const MolecularProfile pr = make_profile(c, spec);
    const SampledFunction b = make_molecule(c, ctx);
    const auto opt = make_decompose_options(c);
    const Molecule mol = molecular_norm(b, to_point(c.x0, spec.dim()), pr, spec, ctx, opt.molecule);
    Json rep;
    rep["profile"] = profile_json(pr);
    rep["lq"] = mol.norms.lq;
    rep["weighted"] = mol.norms.weighted;
    rep["molecular_norm"] = mol.norms.m;
    rep["approximate"] = mol.norms.approximate;
    rep["max_moment_residual"] = mol.moments.max_residual;
    out << rep.dump(2) << "\n";
    return ok;
}

inline std::string lambda_csv(const DecompositionResult& res) {
    std::ostringstream os;
    os << "j,lambda_j,t,volume,p_l1,norm_margin,moment_residual,max_outside\n";
    for (const auto& term : res.terms) {
        const auto& lv = res.levels[static_cast<size_t>(term.level)];
        os << term.level << ',' << num(term.lambda) << ',' << num(term.t) << ',' << num(term.host.volume()) << ','
           << num(lv.p_l1 * res.scale) << ',' << num(term.report.norm_margin()) << ','
           << num(term.report.max_moment_residual) << ',' << num(term.report.max_outside) << '\n';
    }
    return os.str();
}

/// Each atom sampled along the first axis of its host, past both ends.
inline std::string profiles_csv(const DecompositionResult& res, int points) {
    std::ostringstream os;
    const int n = res.terms.empty() ? 1 : res.terms.front().host.dim();
    os << "j,s";
    for (int k = 0; k < n; ++k) os << ",x" << (k + 1);
    os << ",atom\n";
    for (const auto& term : res.terms) {
        const Point axis = term.host.matrix().col(0);
        for (int i = 0; i < points; ++i) {
            const double s = points == 1 ? 0.0 : -1.1 + 2.2 * i / (points - 1);
            const Point x = term.host.center() + s * axis;
            os << term.level << ',' << num(s);
            for (int k = 0; k < n; ++k) os << ',' << num(x(k));
            os << ',' << num(term.atom(x)) << '\n';
        }
    }
    return os.str();
}

inline Json slope_json(const RegimeSlope& s) {
    return Json{{"measured", num_json(s.measured)},
                {"theoretical", s.theoretical},
                {"points", s.points},
                {"applicable", s.applicable},
                {"passed", s.passed}};
}

inline int cmd_decompose(const Flags& f, std::ostream& out, std::ostream& err) {
    RunConfig c = load_with_overrides(f);
    if (f.tol) c.decompose.reconstruction_tol = *f.tol;
    const CoverSpec spec = make_cover(c);
    const QuadContext ctx = make_quad(c);
    const MolecularProfile pr = make_profile(c, spec);
    const fs::path dir(c.output.dir);
    fs::create_directories(dir);

    Json summary;
    summary["seed"] = c.seed;
    summary["cover"] = c.cover.kind;
    summary["profile"] = profile_json(pr);
    int code = ok;
    DecompositionResult res;
    try {
        const SampledFunction b = make_molecule(c, ctx);
        res = decompose(b, to_point(c.x0, spec.dim()), pr, spec, ctx, make_decompose_options(c));
        summary["status"] = "ok";
    } catch (const Error& e) {
        if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const AdmissibilityError*>(&e)) throw;
        summary["status"] = "defect";
        summary["stage"] = e.stage();
        summary["message"] = e.what();
        err << e.what() << "\n";
        code = dynamic_cast<const CoverDefect*>(&e) || dynamic_cast<const InvalidCover*>(&e) ? cover_error
                                                                                               : decomposition_error;
    }
    if (code == ok) {
        summary["gamma"] = res.gamma;
        summary["r"] = res.r;
        summary["ell"] = res.ell;
        summary["j_max"] = res.j_max;
        summary["levels"] = res.levels.size();
        summary["terms"] = res.terms.size();
        summary["certificate"] = res.certificate;
        summary["p_l1_stalled"] = res.p_l1_stalled;
        summary["scale"] = res.scale;
        summary["molecular_norm"] = res.molecular_norm;
        summary["sum_lambda_p"] = res.sum_lambda_p;
        summary["sum_lambda_p_over_norm"] = res.molecular_norm > 0 ? res.sum_lambda_p / res.molecular_norm : 0.0;
        summary["b_l1"] = res.b_l1;
        summary["reconstruction_error"] = res.reconstruction_l1_error;
        summary["reconstruction_relative"] = res.reconstruction_relative();
        summary["slopes"] = Json{{"w1", slope_json(res.w1)}, {"w2", slope_json(res.w2)}};
        write_text(dir / "lambda.csv", lambda_csv(res));
        if (c.output.profiles) write_text(dir / "profiles.csv", profiles_csv(res, c.output.profile_points));
    }
    summary["config"] = to_json(c);
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    out << "wrote " << (dir / "summary.json").string() << "\n";
    return code;
}

// ---------------------------------------------------------------------------

struct LambdaRow {
    int j = 0;
    double lambda = 0.0;
    double t = 0.0;
    double norm_margin = 0.0;
};

inline std::vector<LambdaRow> read_lambda_csv(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError(p.string() + ": missing");
    std::string line;
    if (!std::getline(in, line) || line.rfind("j,lambda_j,t,volume,p_l1,norm_margin", 0) != 0)
        throw ConfigError(p.string() + ": unexpected header");
    std::vector<LambdaRow> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw ConfigError(p.string() + ": line " + std::to_string(lineno) + " needs 8 columns");
        try {
            size_t used = 0;
            LambdaRow r;
            r.j = std::stoi(cells[0], &used);
            if (used != cells[0].size()) throw std::invalid_argument("j");
            r.lambda = std::stod(cells[1]);
            r.t = std::stod(cells[2]);
            r.norm_margin = std::stod(cells[5]);
            if (!(r.lambda > 0.0)) throw std::invalid_argument("lambda");
            rows.push_back(r);
        } catch (const std::exception&) {
            throw ConfigError(p.string() + ": line " + std::to_string(lineno) + " is malformed");
        }
    }
    return rows;
}

inline int cmd_report(const Flags& f, std::ostream& out) {
    if (f.out.empty()) throw ConfigError("report needs --out <run directory>");
    const fs::path dir(f.out);
    std::ifstream sin(dir / "summary.json");
    if (!sin) throw ConfigError((dir / "summary.json").string() + ": missing");
    Json summary;
    try {
        summary = Json::parse(sin);
    } catch (const Json::parse_error& e) {
        throw ConfigError((dir / "summary.json").string() + ": " + e.what());
    }
    if (summary.value("status", "") != "ok") throw ConfigError("the run did not complete; nothing to report");
    const auto rows = read_lambda_csv(dir / "lambda.csv");
    int r = 0, ell = 1;
    double th1 = 0.0, th2 = 0.0;
    try {
        r = summary.at("r").get<int>();
        ell = summary.at("ell").get<int>();
        th1 = summary.at("slopes").at("w1").at("theoretical").get<double>();
        th2 = summary.at("slopes").at("w2").at("theoretical").get<double>();
    } catch (const Json::exception& e) {
        throw ConfigError((dir / "summary.json").string() + ": " + e.what());
    }

    // log2 lambda per difference term with the theoretical line of each regime
    // anchored at the regime's first point; the first term stands alone.
    std::ostringstream slopes;
    slopes << "level,j,log2_lambda,regime,w1_theory,w2_theory\n";
    std::optional<std::pair<int, double>> anchor1, anchor2;
    for (const auto& row : rows) {
        const double y = std::log2(row.lambda);
        if (row.j == 0) {
            slopes << "0,," << num(y) << ",first,,\n";
            continue;
        }
        const int j = row.j - 1;
        const bool inner = r - j * ell >= 0;
        auto& anchor = inner ? anchor2 : anchor1;
        if (!anchor) anchor = std::make_pair(j, y);
        const double line = anchor->second + (inner ? th2 : th1) * (j - anchor->first);
        slopes << row.j << ',' << j << ',' << num(y) << ',' << (inner ? "w2" : "w1") << ',' << (inner ? "" : num(line)) << ','
               << (inner ? num(line) : "") << '\n';
    }
    write_text(dir / "slopes.csv", slopes.str());

    std::ostringstream hist;
    hist << "bin_lo,bin_hi,count\n";
    constexpr int bins = 20;
    std::vector<int> counts(bins, 0);
    for (const auto& row : rows) {
        const int b = std::clamp(static_cast<int>(row.norm_margin * bins), 0, bins - 1);
        ++counts[static_cast<size_t>(b)];
    }
    if (!rows.empty())
        for (int b = 0; b < bins; ++b)
            hist << num(static_cast<double>(b) / bins) << ',' << num(static_cast<double>(b + 1) / bins) << ','
                 << counts[static_cast<size_t>(b)] << '\n';
    write_text(dir / "margins_hist.csv", hist.str());
    out << "wrote " << (dir / "slopes.csv").string() << " and " << (dir / "margins_hist.csv").string() << "\n";
    return ok;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Anisotropic Hardy space atoms, molecules and decompositions", "aniso_cli"};
    app.require_subcommand(1);
    Flags f;
    auto common = [&f](CLI::App* sub) {
        sub->add_option("--config", f.config, "run configuration (JSON)");
        sub->add_option("--out", f.out, "output directory");
        sub->add_option("--seed", f.seed, "overrides the config seed");
        sub->add_option("--jmax", f.jmax, "overrides decompose.j_max");
        sub->add_option("--tol", f.tol, "acceptance tolerance of the subcommand");
    };
    auto* validate = app.add_subcommand("validate-cover", "estimate (C1)/(C2) constants and nesting");
    auto* rho_cmd = app.add_subcommand("rho", "quasidistance between two points");
    auto* norm_cmd = app.add_subcommand("molecule-norm", "molecular norm of the configured molecule");
    auto* dec = app.add_subcommand("decompose", "atomic decomposition of the configured molecule");
    auto* rep = app.add_subcommand("report", "plot-ready tables from a decomposition run");
    for (auto* s : {validate, rho_cmd, norm_cmd, dec, rep}) common(s);
    rho_cmd->add_option("--x", f.x, "first point, comma separated")->required();
    rho_cmd->add_option("--y", f.y, "second point, comma separated")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return config_error;
    }
    try {
        if (validate->parsed()) return cmd_validate_cover(f, out);
        if (rho_cmd->parsed()) return cmd_rho(f, out);
        if (norm_cmd->parsed()) return cmd_molecule_norm(f, out);
        if (dec->parsed()) return cmd_decompose(f, out, err);
        return cmd_report(f, out);
    } catch (const ConfigError& e) {
        err << e.what() << "\n";
        return config_error;
    } catch (const AdmissibilityError& e) {
        err << e.what() << "\n";
        return config_error;
    } catch (const ContractError& e) {
        err << e.what() << "\n";
        return config_error;
    } catch (const InvalidCover& e) {
        err << e.what() << "\n";
        return config_error;
    } catch (const CoverDefect& e) {
        err << e.what() << "\n";
        return cover_error;
    } catch (const EstimationError& e) {
        err << e.what() << "\n";
        return cover_error;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return decomposition_error;
    } catch (const fs::filesystem_error& e) {
        err << e.what() << "\n";
        return config_error;
    }
}

}  // namespace aniso::cli
