#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aniso/cover.hpp"
#include "aniso/decompose.hpp"
#include "aniso/error.hpp"
#include "aniso/hardy.hpp"

namespace aniso {

using Json = nlohmann::ordered_json;

/// Which built-in family the run uses.
struct CoverConfig {
    std::string kind = "isotropic";       // isotropic | diagonal | pointwise_variable
    int dim = 1;                          // isotropic only
    std::vector<double> exponents{};      // diagonal only, summing to 1
    double b_min = 0.4, b_max = 0.6;      // pointwise_variable only
    std::optional<CoverParameters> declared{};  // overrides the built-in (a1..a6)
};

struct TripleConfig {
    double p = 1.0;
    double q = 2.0;  // "inf" in the file for q = infinity
    int m = 3;
};

/// A manufactured test function, turned into a molecule by subtracting its
/// degree-m projection on `host`.
struct MoleculeConfig {
    std::string kind = "manufactured";  // manufactured | atom | file-table
    std::vector<double> center{};       // default: origin
    std::vector<double> widths{};       // semi-axes of the bump or decay shape; default 0.8 each
    double amplitude = 1.0;
    std::vector<double> frequency{};    // default: 0
    double decay = 0.0;                 // > 0 selects the decaying family (1 + |u|^2)^{-decay/2}
    std::vector<double> host{};         // semi-axes of the correction ellipsoid about the origin; default widths + 0.5
    std::string table{};                // file-table: comma-separated x[,y],value on a regular grid
    double spike_amplitude = 0.0;       // manufactured only: adds a narrow molecule at x0
    double spike_width = 0.05;
};

struct QuadConfig {
    int radial_order = 0;   // 0 keeps the built-in order
    int angular_order = 0;
    double truncation_cap = 1e3;
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
};

struct DecomposeConfig {
    int j_max = 40;
    double tail_tol = 1e-12;
    double reconstruction_tol = 1e-3;
    double lambda_floor = 1e-12;
    int quiet_levels = 3;
    int rho_centers = 65;
};

struct OutputConfig {
    std::string dir = "out";
    bool profiles = true;     // sampled atom profiles in profiles.csv
    int profile_points = 201;  // per atom, along the first axis of its host
};

struct RunConfig {
    CoverConfig cover;
    TripleConfig triple;
    std::optional<double> d{};  // default: threshold + 0.5
    std::vector<double> x0{};   // default: origin
    MoleculeConfig molecule;
    QuadConfig quad;
    DecomposeConfig decompose;
    OutputConfig output;
    std::uint64_t seed = 20240917;

    int dim() const;
};

namespace detail {

class FieldReader {
public:
    FieldReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] static void fail(const std::string& path, const std::string& what) {
        throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + what);
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& raw(const std::string& key) const { return j_.at(key); }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& [k, v] : j_.items()) {
            bool ok = false;
            for (const char* a : keys) ok = ok || k == a;
            if (!ok) fail(at(k), "unknown field");
        }
    }

    void get(const std::string& key, double& out) const {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (v.is_string() && (v == "inf" || v == "infinity")) {
            out = std::numeric_limits<double>::infinity();
            return;
        }
        if (!v.is_number()) fail(at(key), "expected a number");
        out = v.get<double>();
    }
    void get(const std::string& key, int& out) const {
        if (!has(key)) return;
        if (!raw(key).is_number_integer()) fail(at(key), "expected an integer");
        out = raw(key).get<int>();
    }
    void get(const std::string& key, std::uint64_t& out) const {
        if (!has(key)) return;
        if (!raw(key).is_number_unsigned()) fail(at(key), "expected a non-negative integer");
        out = raw(key).get<std::uint64_t>();
    }
    void get(const std::string& key, bool& out) const {
        if (!has(key)) return;
        if (!raw(key).is_boolean()) fail(at(key), "expected true or false");
        out = raw(key).get<bool>();
    }
    void get(const std::string& key, std::string& out) const {
        if (!has(key)) return;
        if (!raw(key).is_string()) fail(at(key), "expected a string");
        out = raw(key).get<std::string>();
    }
    void get(const std::string& key, std::vector<double>& out) const {
        if (!has(key)) return;
        const Json& v = raw(key);
        if (!v.is_array()) fail(at(key), "expected an array of numbers");
        out.clear();
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
    }

private:
    const Json& j_;
    std::string path_;
};

inline Json number_or_inf(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

}  // namespace detail

inline int RunConfig::dim() const {
    if (cover.kind == "isotropic") return cover.dim;
    if (cover.kind == "diagonal") return static_cast<int>(cover.exponents.size());
    return 2;
}

inline RunConfig parse_config(const Json& j) {
    using detail::FieldReader;
    RunConfig c;
    const FieldReader root(j, "");
    root.allow({"cover", "triple", "d", "x0", "molecule", "quad", "decompose", "output", "seed"});

    if (root.has("cover")) {
        const FieldReader r(root.raw("cover"), "cover");
        r.allow({"kind", "dim", "exponents", "b_min", "b_max", "declared"});
        r.get("kind", c.cover.kind);
        r.get("dim", c.cover.dim);
        r.get("exponents", c.cover.exponents);
        r.get("b_min", c.cover.b_min);
        r.get("b_max", c.cover.b_max);
        if (r.has("declared")) {
            const FieldReader dr(r.raw("declared"), "cover.declared");
            dr.allow({"a1", "a2", "a3", "a4", "a5", "a6"});
            CoverParameters p;
            dr.get("a1", p.a1);
            dr.get("a2", p.a2);
            dr.get("a3", p.a3);
            dr.get("a4", p.a4);
            dr.get("a5", p.a5);
            dr.get("a6", p.a6);
            c.cover.declared = p;
        }
        if (c.cover.kind != "isotropic" && c.cover.kind != "diagonal" && c.cover.kind != "pointwise_variable")
            FieldReader::fail("cover.kind", "expected isotropic, diagonal or pointwise_variable");
        if (c.cover.kind == "isotropic" && (c.cover.dim < 1 || c.cover.dim > 3))
            FieldReader::fail("cover.dim", "expected 1, 2 or 3");
        if (c.cover.kind == "diagonal" && (c.cover.exponents.empty() || c.cover.exponents.size() > 3))
            FieldReader::fail("cover.exponents", "expected 1 to 3 exponents");
    }
    if (root.has("triple")) {
        const FieldReader r(root.raw("triple"), "triple");
        r.allow({"p", "q", "m"});
        r.get("p", c.triple.p);
        r.get("q", c.triple.q);
        r.get("m", c.triple.m);
    }
    if (root.has("d")) {
        double d = 0.0;
        root.get("d", d);
        c.d = d;
    }
    root.get("x0", c.x0);
    if (root.has("molecule")) {
        const FieldReader r(root.raw("molecule"), "molecule");
        r.allow({"kind", "center", "widths", "amplitude", "frequency", "decay", "host", "table", "spike_amplitude",
                 "spike_width"});
        r.get("kind", c.molecule.kind);
        r.get("center", c.molecule.center);
        r.get("widths", c.molecule.widths);
        r.get("amplitude", c.molecule.amplitude);
        r.get("frequency", c.molecule.frequency);
        r.get("decay", c.molecule.decay);
        r.get("host", c.molecule.host);
        r.get("table", c.molecule.table);
        r.get("spike_amplitude", c.molecule.spike_amplitude);
        r.get("spike_width", c.molecule.spike_width);
        if (!(c.molecule.spike_width > 0.0)) FieldReader::fail("molecule.spike_width", "must be positive");
        if (c.molecule.kind != "manufactured" && c.molecule.kind != "atom" && c.molecule.kind != "file-table")
            FieldReader::fail("molecule.kind", "expected manufactured, atom or file-table");
        if (c.molecule.kind == "file-table" && c.molecule.table.empty())
            FieldReader::fail("molecule.table", "a file-table molecule needs a table path");
    }
    if (root.has("quad")) {
        const FieldReader r(root.raw("quad"), "quad");
        r.allow({"radial_order", "angular_order", "truncation_cap", "abs_tol", "rel_tol"});
        r.get("radial_order", c.quad.radial_order);
        r.get("angular_order", c.quad.angular_order);
        r.get("truncation_cap", c.quad.truncation_cap);
        r.get("abs_tol", c.quad.abs_tol);
        r.get("rel_tol", c.quad.rel_tol);
    }
    if (root.has("decompose")) {
        const FieldReader r(root.raw("decompose"), "decompose");
        r.allow({"j_max", "tail_tol", "reconstruction_tol", "lambda_floor", "quiet_levels", "rho_centers"});
        r.get("j_max", c.decompose.j_max);
        r.get("tail_tol", c.decompose.tail_tol);
        r.get("reconstruction_tol", c.decompose.reconstruction_tol);
        r.get("lambda_floor", c.decompose.lambda_floor);
        r.get("quiet_levels", c.decompose.quiet_levels);
        r.get("rho_centers", c.decompose.rho_centers);
        if (c.decompose.j_max < 0) FieldReader::fail("decompose.j_max", "must be non-negative");
        if (c.decompose.rho_centers < 2) FieldReader::fail("decompose.rho_centers", "must be at least 2");
    }
    if (root.has("output")) {
        const FieldReader r(root.raw("output"), "output");
        r.allow({"dir", "profiles", "profile_points"});
        r.get("dir", c.output.dir);
        r.get("profiles", c.output.profiles);
        r.get("profile_points", c.output.profile_points);
    }
    root.get("seed", c.seed);

    const int n = c.dim();
    auto check_len = [n](const std::vector<double>& v, const char* path) {
        if (!v.empty() && static_cast<int>(v.size()) != n)
            detail::FieldReader::fail(path, "expected " + std::to_string(n) + " entries");
    };
    check_len(c.x0, "x0");
    check_len(c.molecule.center, "molecule.center");
    check_len(c.molecule.widths, "molecule.widths");
    check_len(c.molecule.frequency, "molecule.frequency");
    check_len(c.molecule.host, "molecule.host");
    return c;
}

/// Parses JSON text; syntax errors carry the line and column.
inline RunConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("syntax: ") + e.what());
    }
    return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Every field, defaults included, in a fixed order.
inline Json to_json(const RunConfig& c) {
    Json j;
    Json cov;
    cov["kind"] = c.cover.kind;
    cov["dim"] = c.cover.dim;
    cov["exponents"] = c.cover.exponents;
    cov["b_min"] = c.cover.b_min;
    cov["b_max"] = c.cover.b_max;
    if (c.cover.declared) {
        const auto& p = *c.cover.declared;
        cov["declared"] = Json{{"a1", p.a1}, {"a2", p.a2}, {"a3", p.a3}, {"a4", p.a4}, {"a5", p.a5}, {"a6", p.a6}};
    } else {
        cov["declared"] = nullptr;
    }
    j["cover"] = cov;
    j["triple"] = Json{{"p", c.triple.p}, {"q", detail::number_or_inf(c.triple.q)}, {"m", c.triple.m}};
    j["d"] = c.d ? Json(*c.d) : Json(nullptr);
    j["x0"] = c.x0;
    j["molecule"] = Json{{"kind", c.molecule.kind},           {"center", c.molecule.center},
                         {"widths", c.molecule.widths},       {"amplitude", c.molecule.amplitude},
                         {"frequency", c.molecule.frequency}, {"decay", c.molecule.decay},
                         {"host", c.molecule.host},           {"table", c.molecule.table},
                         {"spike_amplitude", c.molecule.spike_amplitude},
                         {"spike_width", c.molecule.spike_width}};
    j["quad"] = Json{{"radial_order", c.quad.radial_order},
                     {"angular_order", c.quad.angular_order},
                     {"truncation_cap", c.quad.truncation_cap},
                     {"abs_tol", c.quad.abs_tol},
                     {"rel_tol", c.quad.rel_tol}};
    j["decompose"] = Json{{"j_max", c.decompose.j_max},
                          {"tail_tol", c.decompose.tail_tol},
                          {"reconstruction_tol", c.decompose.reconstruction_tol},
                          {"lambda_floor", c.decompose.lambda_floor},
                          {"quiet_levels", c.decompose.quiet_levels},
                          {"rho_centers", c.decompose.rho_centers}};
    j["output"] = Json{{"dir", c.output.dir},
                       {"profiles", c.output.profiles},
                       {"profile_points", c.output.profile_points}};
    j["seed"] = c.seed;
    return j;
}

inline std::string serialize_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Building library objects from a config.

inline CoverSpec make_cover(const RunConfig& c) {
    CoverSpec spec = [&] {
        if (c.cover.kind == "isotropic") return CoverSpec::isotropic(c.cover.dim);
        if (c.cover.kind == "diagonal") return CoverSpec::diagonal(c.cover.exponents);
        return CoverSpec::pointwise_variable(c.cover.b_min, c.cover.b_max);
    }();
    if (c.cover.declared) spec = spec.with_params(*c.cover.declared);
    return spec;
}

inline QuadContext make_quad(const RunConfig& c) {
    QuadContext ctx(c.dim(), c.quad.radial_order, c.quad.angular_order);
    ctx.truncation_cap = c.quad.truncation_cap;
    ctx.abs_tol = c.quad.abs_tol;
    ctx.rel_tol = c.quad.rel_tol;
    return ctx;
}

inline Point to_point(const std::vector<double>& v, int n, double fill = 0.0) {
    Point p = Point::Constant(n, fill);
    for (size_t i = 0; i < v.size(); ++i) p(static_cast<Eigen::Index>(i)) = v[i];
    return p;
}

inline Matrix diag_matrix(const Point& d) { return d.asDiagonal().toDenseMatrix(); }

/// (p, q, m) checked for admissibility, and d (threshold + 0.5 when unset).
inline MolecularProfile make_profile(const RunConfig& c, const CoverSpec& spec) {
    const int n = spec.dim();
    const auto t = admissible_triple(c.triple.p, c.triple.q, c.triple.m, spec.params(), n);
    const double d = c.d ? *c.d : d_threshold(t, spec.params(), n) + 0.5;
    return molecular_profile(t, d, spec.params(), n);
}

namespace detail {

/// Bilinear (or linear) interpolation on a regular grid read from a table;
/// zero outside the grid.
inline SampledFunction table_function(const std::string& path, int n) {
    std::ifstream in(path);
    if (!in) throw ConfigError("molecule.table: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (rows.empty()) continue;  // header
            throw ConfigError("molecule.table: line " + std::to_string(lineno) + " is not numeric");
        }
        if (static_cast<int>(row.size()) != n + 1)
            throw ConfigError("molecule.table: line " + std::to_string(lineno) + " needs " + std::to_string(n + 1) +
                              " columns");
        rows.push_back(row);
    }
    if (n > 2) throw ConfigError("molecule.table: tables are supported for n <= 2");
    std::vector<std::vector<double>> axes(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        for (const auto& r : rows) axes[static_cast<size_t>(k)].push_back(r[static_cast<size_t>(k)]);
        auto& a = axes[static_cast<size_t>(k)];
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        if (a.size() < 2) throw ConfigError("molecule.table: each axis needs at least two grid values");
    }
    const size_t nx = axes[0].size(), ny = n == 2 ? axes[1].size() : 1;
    if (rows.size() != nx * ny) throw ConfigError("molecule.table: the points do not form a full regular grid");
    auto grid = std::make_shared<std::vector<double>>(nx * ny, 0.0);
    auto index_of = [](const std::vector<double>& a, double v) {
        return static_cast<size_t>(std::lower_bound(a.begin(), a.end(), v) - a.begin());
    };
    for (const auto& r : rows) {
        const size_t ix = index_of(axes[0], r[0]);
        const size_t iy = n == 2 ? index_of(axes[1], r[1]) : 0;
        (*grid)[ix * ny + iy] = r.back();
    }
    auto ax = std::make_shared<const std::vector<std::vector<double>>>(axes);
    SampledFunction f;
    f.eval = [grid, ax, nx, ny, n](const Point& x) {
        double w[2][2] = {{0, 0}, {0, 0}};
        size_t lo[2] = {0, 0};
        for (int k = 0; k < n; ++k) {
            const auto& a = (*ax)[static_cast<size_t>(k)];
            const double v = x(k);
            if (v < a.front() || v > a.back()) return 0.0;
            size_t i = static_cast<size_t>(std::upper_bound(a.begin(), a.end(), v) - a.begin());
            i = std::clamp<size_t>(i, 1, a.size() - 1) - 1;
            const double s = (v - a[i]) / (a[i + 1] - a[i]);
            lo[k] = i;
            w[k][0] = 1.0 - s;
            w[k][1] = s;
        }
        if (n == 1) return w[0][0] * (*grid)[lo[0]] + w[0][1] * (*grid)[lo[0] + 1];
        double v = 0.0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) v += w[0][i] * w[1][j] * (*grid)[(lo[0] + i) * ny + lo[1] + j];
        return v;
    };
    // The grid box as an enclosing ellipsoid.
    Point c(n), h(n);
    for (int k = 0; k < n; ++k) {
        const auto& a = axes[static_cast<size_t>(k)];
        c(k) = 0.5 * (a.front() + a.back());
        h(k) = 0.5 * (a.back() - a.front()) * std::sqrt(static_cast<double>(n)) * (1.0 + 1e-9);
    }
    f.support = Ellipsoid(c, diag_matrix(h));
    // On the line every cell is a break, so the rules see one linear piece at a time.
    if (n == 1)
        for (size_t i = 0; i + 1 < nx; ++i) {
            const double lo = axes[0][i], hi = axes[0][i + 1];
            f.breaks.emplace_back(Point::Constant(1, 0.5 * (lo + hi)), Matrix::Constant(1, 1, 0.5 * (hi - lo)));
        }
    return f;
}

/// c a + b, keeping the support hints and breaks of both.
inline SampledFunction combine(const SampledFunction& a, double c, const SampledFunction& b) {
    SampledFunction f;
    f.eval = [a, b, c](const Point& x) { return c * a(x) + b(x); };
    if (b.support) f.support = b.support;
    f.decay = b.decay;
    f.breaks = all_breaks(b);
    for (const auto& e : all_breaks(a)) f.breaks.push_back(e);
    return f;
}

}  // namespace detail

/// The molecule described by the config, before normalization.
inline SampledFunction make_molecule(const RunConfig& c, const QuadContext& ctx) {
    const int n = c.dim();
    const auto& mc = c.molecule;
    const Point center = to_point(mc.center, n);
    const Point widths = to_point(mc.widths, n, 0.8);
    const int m = c.triple.m;
    if ((widths.array() <= 0.0).any()) throw ConfigError("molecule.widths: must be positive");
    if (mc.kind == "file-table") {
        const auto g = detail::table_function(mc.table, n);
        const Ellipsoid host = mc.host.empty() ? *g.support : Ellipsoid(Point::Zero(n), diag_matrix(to_point(mc.host, n)));
        return compact_molecule(g, host, m, ctx);
    }
    const Point freq = to_point(mc.frequency, n);
    if (mc.kind == "atom") {
        // Corrected on its own support, so it is supported in one ellipsoid.
        const auto g = smooth_bump(center, diag_matrix(widths), mc.amplitude, freq);
        return compact_molecule(g, *g.support, m, ctx);
    }
    const Point host_axes = mc.host.empty() ? Point(widths.array() + 0.5) : to_point(mc.host, n);
    const Ellipsoid host(Point::Zero(n), diag_matrix(host_axes));
    const SampledFunction base =
        mc.decay > 0.0 ? decaying_molecule(center, diag_matrix(widths), mc.decay, mc.amplitude, host, m, ctx)
                       : compact_molecule(smooth_bump(center, diag_matrix(widths), mc.amplitude, freq), host, m, ctx);
    if (mc.spike_amplitude == 0.0) return base;
    const Point x0 = to_point(c.x0, n);
    const Matrix w = Matrix::Identity(n, n) * mc.spike_width;
    return detail::combine(compact_molecule(smooth_bump(x0, w), Ellipsoid(x0, 1.5 * w), m, ctx), mc.spike_amplitude,
                           base);
}

inline DecomposeOptions make_decompose_options(const RunConfig& c) {
    DecomposeOptions o;
    o.j_max = c.decompose.j_max;
    o.tail_tol = c.decompose.tail_tol;
    o.reconstruction_tol = c.decompose.reconstruction_tol;
    o.lambda_floor = c.decompose.lambda_floor;
    o.quiet_levels = c.decompose.quiet_levels;
    o.molecule.rho.centers = c.decompose.rho_centers;
    o.nesting_seed = c.seed;
    return o;
}

}  // namespace aniso
