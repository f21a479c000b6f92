#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gplc/gplc.hpp"
#include "gplc/kernels_json.hpp"

namespace gplc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Bad or inconsistent configuration; maps to exit code 2.
class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// A JSON object whose fields are read once each; leftovers are rejected by done().
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError(path_ + ": expected a JSON object");
        }
    }

    [[nodiscard]] bool has(const std::string& key) {
        if (j_.contains(key)) {
            used_.insert(key);
            return true;
        }
        return false;
    }

    [[nodiscard]] const json& raw(const std::string& key) {
        if (!has(key)) {
            throw ConfigError(path_ + ": missing field '" + key + "'");
        }
        return j_.at(key);
    }

    template <class T>
    [[nodiscard]] T require(const std::string& key) {
        return convert<T>(key, raw(key));
    }

    template <class T>
    [[nodiscard]] T get(const std::string& key, T fallback) {
        return has(key) ? convert<T>(key, j_.at(key)) : std::move(fallback);
    }

    [[nodiscard]] Section child(const std::string& key) { return {raw(key), field(key)}; }

    [[nodiscard]] std::string field(const std::string& key) const { return path_ + "." + key; }

    void done() const {
        for (const auto& item : j_.items()) {
            if (!used_.contains(item.key())) {
                throw ConfigError(path_ + ": unknown field '" + item.key() + "'");
            }
        }
    }

private:
    template <class T>
    T convert(const std::string& key, const json& v) const {
        try {
            return v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(field(key) + ": wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

struct Context {
    std::string subcommand;
    json config = json::object();
    fs::path config_dir;
    std::uint64_t seed = 0;
    fs::path out_dir;
    int threads = 1;
    std::vector<std::string> outputs;
    std::ostream* out = nullptr;

    [[nodiscard]] fs::path input(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : config_dir / path;
    }

    void write_text(const std::string& name, const std::string& text) {
        const fs::path p = out_dir / name;
        std::ofstream f(p, std::ios::binary);
        if (!f) {
            throw Error("cannot open '" + p.string() + "' for writing");
        }
        f << text;
        if (!f) {
            throw Error("failed writing '" + p.string() + "'");
        }
        outputs.push_back(name);
    }

    void write_table(const std::string& name, const csv::Table& t) { write_text(name, t.str()); }

    void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }
};

namespace detail {

inline int positive_int(Section& s, const std::string& key, int fallback) {
    const int v = s.get<int>(key, fallback);
    if (v < 1) {
        throw ConfigError(s.field(key) + ": must be >= 1");
    }
    return v;
}

inline double positive_double(Section& s, const std::string& key, double fallback) {
    const double v = s.get<double>(key, fallback);
    if (!(v > 0.0)) {
        throw ConfigError(s.field(key) + ": must be > 0");
    }
    return v;
}

inline KernelSpec kernel(Section& s) {
    try {
        return kernel_from_json(s.raw("kernel"));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(s.field("kernel") + ": " + e.what());
    }
}

// Box [lower, upper] of dimension d, the unit cube by default.
inline UniformBox box(Section& s, int d) {
    UniformBox b = UniformBox::unit(d);
    b.lower = s.get<std::vector<double>>("lower", b.lower);
    b.upper = s.get<std::vector<double>>("upper", b.upper);
    if (b.lower.size() != static_cast<std::size_t>(d) || b.upper.size() != static_cast<std::size_t>(d)) {
        throw ConfigError(s.field("lower") + "/upper: need " + std::to_string(d) + " values each");
    }
    for (int k = 0; k < d; ++k) {
        if (!(b.upper[static_cast<std::size_t>(k)] > b.lower[static_cast<std::size_t>(k)])) {
            throw ConfigError(s.field("upper") + ": must exceed lower in every coordinate");
        }
    }
    return b;
}

inline std::vector<double> tau_grid(Section& s, double inv_min, double inv_max, int count) {
    if (s.has("tau")) {
        auto tau = s.require<std::vector<double>>("tau");
        if (tau.size() < 2) {
            throw ConfigError(s.field("tau") + ": need at least 2 values");
        }
        for (double t : tau) {
            if (!(t > 0.0 && t < 1.0)) {
                throw ConfigError(s.field("tau") + ": values must lie in (0, 1)");
            }
        }
        return tau;
    }
    inv_min = s.get<double>("inv_tau_min", inv_min);
    inv_max = s.get<double>("inv_tau_max", inv_max);
    count = s.get<int>("n_tau", count);
    if (!(inv_min > 1.0) || !(inv_max > inv_min) || count < 2) {
        throw ConfigError(s.field("inv_tau_min") + ": need 1 < inv_tau_min < inv_tau_max and n_tau >= 2");
    }
    return inverse_tau_grid(inv_min, inv_max, count);
}

inline LikelihoodBounds bounds(Section& parent, int d) {
    LikelihoodBounds b = LikelihoodBounds::defaults(d);
    if (!parent.has("bounds")) {
        return b;
    }
    Section s = parent.child("bounds");
    if (s.has("nu")) {
        const auto v = s.require<std::vector<double>>("nu");
        if (v.size() != 2) {
            throw ConfigError(s.field("nu") + ": expected [lower, upper]");
        }
        b.nu_lower = v[0];
        b.nu_upper = v[1];
    }
    if (s.has("sigma2")) {
        const auto v = s.require<std::vector<double>>("sigma2");
        if (v.size() != 2) {
            throw ConfigError(s.field("sigma2") + ": expected [lower, upper]");
        }
        b.sigma2_lower = v[0];
        b.sigma2_upper = v[1];
    }
    b.theta_lower = s.get<std::vector<double>>("theta_lower", b.theta_lower);
    b.theta_upper = s.get<std::vector<double>>("theta_upper", b.theta_upper);
    s.done();
    if (b.dimension() != d) {
        throw ConfigError(parent.field("bounds") + ": theta bounds need " + std::to_string(d) + " entries");
    }
    try {
        b.validate();
    } catch (const Error& e) {
        throw ConfigError(parent.field("bounds") + ": " + e.what());
    }
    return b;
}

inline FitConfig fit_config(Section& s, int d, std::uint64_t seed, int threads, int n_random, int n_polish) {
    FitConfig f;
    f.bounds = bounds(s, d);
    f.n_random = positive_int(s, "n_random", n_random);
    f.n_polish = positive_int(s, "n_polish", n_polish);
    f.cluster_radius = positive_double(s, "cluster_radius", f.cluster_radius);
    f.seed = seed;
    f.threads = threads;
    return f;
}

inline csv::DesignData load_design(Context& ctx, Section& s) {
    const std::string path = ctx.input(s.require<std::string>("design")).string();
    try {
        return csv::load_design(csv::parse_file(path), path);
    } catch (const Error& e) {
        throw ConfigError(s.field("design") + ": " + e.what());
    }
}

inline json fit_json(const HyperparameterFit& f) {
    return {{"nu", f.params.nu},
            {"theta", f.params.theta},
            {"sigma2", f.params.sigma2},
            {"mean", f.mean},
            {"log_likelihood", f.log_likelihood},
            {"best_start_log_likelihood", f.best_start_log_likelihood},
            {"n_random", f.n_random},
            {"n_polished", f.n_polished},
            {"n_local_maxima", f.n_local_maxima},
            {"warning", f.warning}};
}

inline json curve_json(const CurveSeries& c) {
    return {{"label", c.label},
            {"empirical_slope", c.empirical_fit.slope},
            {"empirical_r2", c.empirical_fit.r2},
            {"theory_grid_slope", c.theory_grid_slope},
            {"rate_exponent", c.rate.exponent},
            {"rate_log_power", c.rate.log_power}};
}

inline RateLaw decay_rate(Section& s) {
    Section r = s.child("rate");
    const std::string family = r.require<std::string>("family");
    RateParams p;
    p.nu = r.get<double>("nu", p.nu);
    p.hurst = r.get<double>("hurst", p.hurst);
    p.dimension = r.get<int>("dimension", p.dimension);
    r.done();
    try {
        return rate_law(kernel_family_from_string(family), p);
    } catch (const Error& e) {
        throw ConfigError(s.field("rate") + ": " + e.what());
    }
}

inline void write_plan_csv(Context& ctx, const Points& pts, const Eigen::VectorXd& sigma_eps2,
                           const AllocationPlan& plan) {
    std::vector<std::string> header{"point_index"};
    for (Eigen::Index k = 0; k < pts.cols(); ++k) {
        header.push_back("x_" + std::to_string(k + 1));
    }
    header.insert(header.end(), {"sigma_eps2", "s_real", "s_int"});
    csv::Table t(header);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        std::vector<std::string> row{std::to_string(i)};
        for (Eigen::Index k = 0; k < pts.cols(); ++k) {
            row.push_back(csv::format(pts(i, k)));
        }
        row.push_back(csv::format(sigma_eps2[i]));
        row.push_back(csv::format(plan.s_real[i]));
        row.push_back(std::to_string(plan.s_int[static_cast<std::size_t>(i)]));
        t.add_row(std::move(row));
    }
    ctx.write_table("plan.csv", t);
}

inline json forecast_json(const BudgetForecast& f) {
    json curve = json::array();
    for (const auto& [t, v] : f.curve) {
        curve.push_back({t, v});
    }
    return {{"T", f.solved_T},
            {"per_point", f.per_point},
            {"target_imse", f.target},
            {"imse_T0", f.inputs.imse_T0},
            {"T0", f.inputs.T0},
            {"sigma_eps2_bar", f.inputs.sigma_eps2_bar},
            {"rate_exponent", f.inputs.rate.exponent},
            {"rate_log_power", f.inputs.rate.log_power},
            {"curve", curve}};
}

inline csv::Table forecast_table(const BudgetForecast& f) {
    csv::Table t({"T", "imse"});
    for (const auto& [budget, v] : f.curve) {
        t.add_row(std::vector<double>{budget, v});
    }
    return t;
}

} // namespace detail

// Config: {kernel, nodes, terms, lower, upper, node_table}.
inline void run_spectrum(Context& ctx) {
    Section s(ctx.config, "config");
    const KernelSpec spec = detail::kernel(s);
    const int d = spec.dimension();
    const UniformBox b = detail::box(s, d);
    const int nodes = detail::positive_int(s, "nodes", d == 1 ? 2000 : 45);
    const long total = static_cast<long>(std::pow(nodes, d));
    const int terms = detail::positive_int(s, "terms", static_cast<int>(std::min<long>(200, total / 10)));
    const bool node_table = s.get<bool>("node_table", false);
    s.done();
    const Quadrature quad = trapezoid_box(b.lower, b.upper, nodes);
    const Spectrum sp = nystrom_spectrum(spec, quad, terms);
    csv::Table t({"p", "lambda"});
    for (Eigen::Index p = 0; p < sp.size(); ++p) {
        t.add_row({std::to_string(p + 1), csv::format(sp.eigenvalues[p])});
    }
    ctx.write_table("spectrum.csv", t);
    if (node_table) {
        std::vector<std::string> header;
        for (int k = 0; k < d; ++k) {
            header.push_back("x_" + std::to_string(k + 1));
        }
        header.emplace_back("weight");
        csv::Table nt(header);
        for (Eigen::Index j = 0; j < sp.nodes.rows(); ++j) {
            std::vector<double> row(sp.nodes.row(j).data(), sp.nodes.row(j).data() + d);
            for (int k = 0; k < d; ++k) {
                row[static_cast<std::size_t>(k)] = sp.nodes(j, k);
            }
            row.push_back(sp.weights[j]);
            nt.add_row(row);
        }
        ctx.write_table("nodes.csv", nt);
    }
    ctx.write_json("spectrum.json", {{"terms", sp.size()},
                                     {"nodes", sp.nodes.rows()},
                                     {"quadrature_trace", sp.quadrature_trace},
                                     {"residual_trace", sp.residual_trace}});
}

// Config: {kernel, n, tau | inv_tau_min/inv_tau_max/n_tau, n_designs, quad_nodes,
// spectrum_nodes, spectrum_terms, lower, upper}.
inline void run_curve(Context& ctx) {
    Section s(ctx.config, "config");
    const KernelSpec spec = detail::kernel(s);
    const int d = spec.dimension();
    const UniformBox b = detail::box(s, d);
    LearningCurveConfig lc;
    lc.n = detail::positive_int(s, "n", 200);
    lc.tau_grid = detail::tau_grid(s, 5.0, 100.0, 12);
    lc.n_designs = detail::positive_int(s, "n_designs", 10);
    lc.seed = ctx.seed;
    lc.threads = ctx.threads;
    const int quad_nodes = detail::positive_int(s, "quad_nodes", d == 1 ? 2000 : 40);
    const int spectrum_nodes = detail::positive_int(s, "spectrum_nodes", d == 1 ? 2000 : 40);
    const long m = static_cast<long>(std::pow(spectrum_nodes, d));
    const int spectrum_terms =
        detail::positive_int(s, "spectrum_terms", static_cast<int>(std::min<long>(200, std::max<long>(1, m / 10))));
    s.done();
    const Measure mu(b);
    const LearningCurve curve = empirical_learning_curve(spec, mu, trapezoid_box(b.lower, b.upper, quad_nodes), lc);
    const Spectrum sp = nystrom_spectrum(spec, trapezoid_box(b.lower, b.upper, spectrum_nodes), spectrum_terms);
    std::vector<double> theory;
    for (double t : lc.tau_grid) {
        theory.push_back(asymptotic_imse(sp, t).estimate);
    }
    RateLaw rate;
    try {
        rate = rate_law(spec);
    } catch (const Error&) {
        // Families without a closed-form law still get the Nystrom reference.
        rate.exponent = 0.0;
    }
    const CurveSeries c = gplc::detail::make_series("curve", lc.tau_grid, curve, std::move(theory), rate);
    ctx.write_table("curve.csv", c.table());
    ctx.write_json("curve.json", detail::curve_json(c));
}

// Config: {design, noise, bounds, n_random, n_polish, cluster_radius}.
inline void run_fit(Context& ctx) {
    Section s(ctx.config, "config");
    const csv::DesignData data = detail::load_design(ctx, s);
    const double noise = s.get<double>("noise", data.observations.noise.mean());
    if (!(noise >= 0.0)) {
        throw ConfigError("config.noise: must be >= 0");
    }
    const FitConfig f = detail::fit_config(s, static_cast<int>(data.points.cols()), ctx.seed, ctx.threads, 10000, 150);
    s.done();
    const HyperparameterFit fit = fit_hyperparameters(data.points, data.observations.values, noise, f);
    json j = detail::fit_json(fit);
    j["noise"] = noise;
    ctx.write_json("fit.json", j);
}

// Config, direct form: {imse_T0, T0, sigma_eps2_bar, rate: {family, nu, hurst, dimension},
// target_imse, n_points, curve_points}.
// Config, data form: {design, target_imse, bounds, n_random, n_polish, cluster_radius, grid, curve_points};
// the noise comes from the replicates, the kernel from a likelihood fit and IMSE_T0 from the fitted model.
inline void run_plan(Context& ctx) {
    Section s(ctx.config, "config");
    if (s.has("seed") && s.require<std::uint64_t>("seed") != ctx.seed) {
        throw ConfigError("config.seed: disagrees with --seed");
    }
    const double target = s.require<double>("target_imse");
    const int curve_points = detail::positive_int(s, "curve_points", 50);
    DecayInputs inputs;
    long n_points = 1;
    json extra = json::object();
    if (s.has("design")) {
        const csv::DesignData data = detail::load_design(ctx, s);
        const int d = static_cast<int>(data.points.cols());
        const FitConfig f = detail::fit_config(s, d, ctx.seed, ctx.threads, 10000, 150);
        const int grid = detail::positive_int(s, "grid", d == 1 ? 1000 : 75);
        s.done();
        const ObservationSet& obs = data.observations;
        const NoiseEstimate noise = estimate_noise(obs);
        const HyperparameterFit fit = fit_hyperparameters(data.points, obs.values, obs.noise.mean(), f);
        const Design design(data.points, Measure::unit_cube(d));
        const HeteroscedasticImse imse(fit.params.kernel(), design, trapezoid_box(std::vector<double>(d, 0.0),
                                                                                  std::vector<double>(d, 1.0), grid));
        inputs.imse_T0 = imse.with_noise(obs.noise);
        long t0 = 0;
        for (int c : obs.counts) {
            t0 += c;
        }
        inputs.T0 = static_cast<double>(t0);
        inputs.sigma_eps2_bar = noise.mean;
        inputs.rate = rate_law(d == 1 ? KernelFamily::matern1d : KernelFamily::matern_tensor,
                               {fit.params.nu, 0.5, d});
        n_points = design.size();
        extra["fit"] = detail::fit_json(fit);
    } else {
        inputs.imse_T0 = s.require<double>("imse_T0");
        inputs.T0 = s.require<double>("T0");
        inputs.sigma_eps2_bar = s.require<double>("sigma_eps2_bar");
        inputs.rate = detail::decay_rate(s);
        n_points = detail::positive_int(s, "n_points", 1);
        s.done();
    }
    const BudgetForecast fc = forecast(inputs, target, n_points, curve_points);
    json j = detail::forecast_json(fc);
    j.update(extra);
    ctx.write_json("forecast.json", j);
    ctx.write_table("forecast.csv", detail::forecast_table(fc));
}

// Config: {kernel, budget, design | (points, sigma_eps2), grid, lower, upper}.
inline void run_allocate(Context& ctx) {
    Section s(ctx.config, "config");
    const KernelSpec spec = detail::kernel(s);
    const int d = spec.dimension();
    const UniformBox b = detail::box(s, d);
    const long budget = s.require<long>("budget");
    const int grid = detail::positive_int(s, "grid", d == 1 ? 1000 : 75);
    Points pts;
    Eigen::VectorXd sigma_eps2;
    if (s.has("design")) {
        const csv::DesignData data = detail::load_design(ctx, s);
        pts = data.points;
        sigma_eps2 = data.observations.sigma_eps2;
        if (sigma_eps2.size() != pts.rows()) {
            throw ConfigError("config.design: noise variances are unknown; use z,s,sigma_eps2 or >= 2 replicates");
        }
    } else {
        const auto rows = s.require<std::vector<std::vector<double>>>("points");
        const auto noise = s.require<std::vector<double>>("sigma_eps2");
        if (rows.empty() || rows.size() != noise.size()) {
            throw ConfigError("config.points: need one sigma_eps2 entry per point");
        }
        pts.resize(static_cast<Eigen::Index>(rows.size()), d);
        sigma_eps2.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != static_cast<std::size_t>(d)) {
                throw ConfigError("config.points: point " + std::to_string(i) + " is not " + std::to_string(d) +
                                  "-dimensional");
            }
            for (int k = 0; k < d; ++k) {
                pts(static_cast<Eigen::Index>(i), k) = rows[i][static_cast<std::size_t>(k)];
            }
            sigma_eps2[static_cast<Eigen::Index>(i)] = noise[i];
        }
    }
    s.done();
    if (pts.cols() != d) {
        throw ConfigError("config.design: points are " + std::to_string(pts.cols()) + "-dimensional, kernel is " +
                          std::to_string(d) + "-dimensional");
    }
    const Design design(pts, Measure(b));
    const AllocationPlan plan = plan_allocation(spec, design, sigma_eps2, budget, trapezoid_box(b.lower, b.upper, grid));
    detail::write_plan_csv(ctx, pts, sigma_eps2, plan);
    ctx.write_json("allocation.json", {{"T", plan.budget},
                                       {"i_star", plan.i_star},
                                       {"imse_optimal", plan.achieved_imse},
                                       {"imse_uniform", plan.uniform_imse},
                                       {"imse_real", plan.real_imse},
                                       {"quasi_optimal", plan.quasi_optimal}});
}

inline SimulatorConfig simulator_config(Section& parent) {
    SimulatorConfig c;
    if (!parent.has("simulator")) {
        return c;
    }
    Section s = parent.child("simulator");
    c.truth = truth_kind_from_string(s.get<std::string>("truth", "surface_plus_kl"));
    c.noise = noise_kind_from_string(s.get<std::string>("noise", "smooth"));
    c.noise_level = s.get<double>("noise_level", c.noise_level);
    c.kl_amplitude = s.get<double>("kl_amplitude", c.kl_amplitude);
    c.kl_lengthscale = s.get<double>("kl_lengthscale", c.kl_lengthscale);
    c.kl_grid = s.get<int>("kl_grid", c.kl_grid);
    s.done();
    return c;
}

// Config: {simulator, n | design, replicates}. Writes replicate tables that
// load back as designs.
inline void run_simulate(Context& ctx) {
    Section s(ctx.config, "config");
    SimulatorConfig sc = simulator_config(s);
    sc.seed = gplc::detail::case_stream(ctx.seed, 1);
    const int reps = detail::positive_int(s, "replicates", 1);
    Points pts;
    if (s.has("design")) {
        const std::string path = ctx.input(s.require<std::string>("design")).string();
        const csv::Parsed p = csv::parse_file(path);
        if (p.header.size() < 2 || p.header[0] != "x_1" || p.header[1] != "x_2") {
            throw ConfigError("config.design: expected columns x_1,x_2");
        }
        pts.resize(static_cast<Eigen::Index>(p.rows.size()), 2);
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            pts(static_cast<Eigen::Index>(i), 0) = p.rows[i][0];
            pts(static_cast<Eigen::Index>(i), 1) = p.rows[i][1];
        }
    } else {
        const int n = detail::positive_int(s, "n", 100);
        auto rng = make_stream(ctx.seed, 2);
        pts = latin_hypercube(n, UniformBox::unit(2), rng);
    }
    s.done();
    try {
        Design(pts, Measure::unit_cube(2));
    } catch (const Error& e) {
        throw ConfigError(std::string("config.design: ") + e.what());
    }
    const SyntheticSimulator sim(sc);
    const auto draws = sim.replicates(pts, std::vector<long>(static_cast<std::size_t>(pts.rows()), reps),
                                      gplc::detail::case_stream(ctx.seed, 100));
    std::vector<std::string> header{"x_1", "x_2"};
    for (int j = 0; j < reps; ++j) {
        header.push_back("z_" + std::to_string(j + 1));
    }
    csv::Table obs(header);
    csv::Table truth({"x_1", "x_2", "truth", "sigma_eps2"});
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        std::vector<double> row{pts(i, 0), pts(i, 1)};
        row.insert(row.end(), draws[static_cast<std::size_t>(i)].begin(), draws[static_cast<std::size_t>(i)].end());
        obs.add_row(row);
        truth.add_row(std::vector<double>{pts(i, 0), pts(i, 1), sim.truth(pts.row(i).transpose()),
                                          sim.noise_variance(pts.row(i).transpose())});
    }
    ctx.write_table("observations.csv", obs);
    ctx.write_table("truth.csv", truth);
}

// Config: {n, quad_nodes, inv_tau_min, inv_tau_max, n_tau, n_designs, hursts, spectrum_nodes, spectrum_terms}.
inline void run_figure1_cmd(Context& ctx) {
    Section s(ctx.config, "config");
    Figure1Config c;
    c.n = detail::positive_int(s, "n", static_cast<int>(c.n));
    c.quad_nodes = detail::positive_int(s, "quad_nodes", c.quad_nodes);
    c.inv_tau_min = detail::positive_double(s, "inv_tau_min", c.inv_tau_min);
    c.inv_tau_max = detail::positive_double(s, "inv_tau_max", c.inv_tau_max);
    c.n_tau = detail::positive_int(s, "n_tau", c.n_tau);
    c.n_designs = detail::positive_int(s, "n_designs", c.n_designs);
    c.hursts = s.get<std::vector<double>>("hursts", c.hursts);
    c.spectrum_nodes = detail::positive_int(s, "spectrum_nodes", c.spectrum_nodes);
    c.spectrum_terms = detail::positive_int(s, "spectrum_terms", c.spectrum_terms);
    s.done();
    c.seed = ctx.seed;
    c.threads = ctx.threads;
    const auto series = run_figure1(c);
    json summary = json::array();
    for (const auto& sr : series) {
        ctx.write_table(sr.label + ".csv", sr.table());
        summary.push_back(detail::curve_json(sr));
    }
    ctx.write_json("figure1.json", summary);
}

// Config: {n, grid_2d, quad_nodes_1d, inv_tau_min, inv_tau_max, n_tau, n_designs, theta}.
inline void run_figure2_cmd(Context& ctx) {
    Section s(ctx.config, "config");
    Figure2Config c;
    c.n = detail::positive_int(s, "n", static_cast<int>(c.n));
    c.grid_2d = detail::positive_int(s, "grid_2d", c.grid_2d);
    c.quad_nodes_1d = detail::positive_int(s, "quad_nodes_1d", c.quad_nodes_1d);
    c.inv_tau_min = detail::positive_double(s, "inv_tau_min", c.inv_tau_min);
    c.inv_tau_max = detail::positive_double(s, "inv_tau_max", c.inv_tau_max);
    c.n_tau = detail::positive_int(s, "n_tau", c.n_tau);
    c.n_designs = detail::positive_int(s, "n_designs", c.n_designs);
    c.theta = detail::positive_double(s, "theta", c.theta);
    s.done();
    c.seed = ctx.seed;
    c.threads = ctx.threads;
    const Figure2Result r = run_figure2(c);
    ctx.write_table(r.matern.label + ".csv", r.matern.table());
    ctx.write_table(r.gaussian.label + ".csv", r.gaussian.table());
    json g = detail::curve_json(r.gaussian);
    g["bound_constant"] = r.gaussian_constant;
    g["bounded"] = r.gaussian_bounded;
    ctx.write_json("figure2.json", {{"matern", detail::curve_json(r.matern)}, {"gaussian", g}});
}

// Config: {simulator, n, grid, test_replicates, noise_replicates, target_ratio, max_s,
// realizations, allocation_budget, bounds, n_random, n_polish, cluster_radius}.
inline void run_casestudy_cmd(Context& ctx) {
    Section s(ctx.config, "config");
    CaseStudyConfig c;
    c.simulator = simulator_config(s);
    c.n = detail::positive_int(s, "n", static_cast<int>(c.n));
    c.grid = detail::positive_int(s, "grid", c.grid);
    c.test_replicates = detail::positive_int(s, "test_replicates", c.test_replicates);
    c.noise_replicates = detail::positive_int(s, "noise_replicates", c.noise_replicates);
    c.target_ratio = detail::positive_double(s, "target_ratio", c.target_ratio);
    c.max_s = detail::positive_int(s, "max_s", static_cast<int>(c.max_s));
    c.realizations = detail::positive_int(s, "realizations", c.realizations);
    c.allocation_budget = s.get<long>("allocation_budget", c.allocation_budget);
    c.fit = detail::fit_config(s, 2, 0, ctx.threads, c.fit.n_random, c.fit.n_polish);
    s.done();
    c.seed = ctx.seed;
    c.threads = ctx.threads;
    const CaseStudyReport r = run_case_study(c);

    csv::Table decay({"s", "T", "emse", "imse_model", "imse_forecast"});
    for (std::size_t k = 0; k < r.emse_by_s.size(); ++k) {
        const double t = static_cast<double>((k + 1) * static_cast<std::size_t>(c.n));
        decay.add_row(std::vector<double>{static_cast<double>(k + 1), t, r.emse_by_s[k], r.imse_by_s[k],
                                          imse_decay(r.forecast.inputs, t)});
    }
    ctx.write_table("emse_decay.csv", decay);
    detail::write_plan_csv(ctx, r.design, r.noise.per_point, r.plan);
    csv::Table table({"metric", "uniform", "optimal"});
    table.add_row({"MSE", csv::format(r.mse_uniform), csv::format(r.mse_optimal)});
    table.add_row({"MaxSE", csv::format(r.maxse_uniform), csv::format(r.maxse_optimal)});
    ctx.write_table("table1.csv", table);
    const double ratio = r.empirical_T > 0 ? static_cast<double>(r.forecast.solved_T) / r.empirical_T : 0.0;
    ctx.write_json("casestudy.json", {{"noise_mean", r.noise.mean},
                                      {"noise_mean_stderr", r.noise_mean_stderr},
                                      {"noise_field_mean", r.noise_field_mean},
                                      {"fit", detail::fit_json(r.fit)},
                                      {"imse_T0", r.imse_T0},
                                      {"emse_T0", r.emse_T0},
                                      {"test_noise_floor", r.test_noise_floor},
                                      {"target_imse", r.target},
                                      {"forecast", detail::forecast_json(r.forecast)},
                                      {"empirical_s", r.empirical_s},
                                      {"empirical_T", r.empirical_T},
                                      {"predicted_over_empirical_T", ratio},
                                      {"allocation_T", r.plan.budget},
                                      {"i_star", r.plan.i_star},
                                      {"imse_optimal", r.plan.achieved_imse},
                                      {"imse_uniform", r.plan.uniform_imse},
                                      {"mse_uniform", r.mse_uniform},
                                      {"mse_optimal", r.mse_optimal},
                                      {"maxse_uniform", r.maxse_uniform},
                                      {"maxse_optimal", r.maxse_optimal},
                                      {"allocation_noise_spearman", r.allocation_noise_spearman}});
}

inline const std::map<std::string, std::pair<std::string, std::function<void(Context&)>>>& commands() {
    static const std::map<std::string, std::pair<std::string, std::function<void(Context&)>>> table{
        {"spectrum", {"Nystrom eigenvalues of a kernel (spectrum.csv)", run_spectrum}},
        {"curve", {"empirical learning curve with its asymptotic reference (curve.csv)", run_curve}},
        {"fit", {"multi-start likelihood fit of a tensor Matern model (fit.json)", run_fit}},
        {"plan", {"budget needed to reach target_imse (forecast.json)", run_plan}},
        {"allocate", {"optimal replication allocation for a budget (plan.csv, allocation.json)", run_allocate}},
        {"simulate", {"replicated runs of the synthetic simulator (observations.csv)", run_simulate}},
        {"figure1", {"fBm learning curves", run_figure1_cmd}},
        {"figure2", {"Matern-5/2 2-D and Gaussian 1-D learning curves", run_figure2_cmd}},
        {"casestudy", {"end-to-end budget planning and allocation study", run_casestudy_cmd}},
    };
    return table;
}

/// Runs the command line; returns the process exit code. 0 on success, 2 on
/// usage or configuration errors, 1 on numerical failures.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian-process learning curves and replication budget planning", "gplc"};
    app.require_subcommand(1);
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int threads = 1;
    std::string chosen;
    for (const auto& [name, entry] : commands()) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--seed", seed, "seed for every random stream")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->callback([&chosen, n = name] { chosen = n; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    Context ctx;
    ctx.subcommand = chosen;
    ctx.seed = seed;
    ctx.threads = threads;
    ctx.out = &out;
    const auto start = std::chrono::steady_clock::now();
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) {
                throw ConfigError("cannot open config '" + config_path + "'");
            }
            try {
                ctx.config = json::parse(f);
            } catch (const json::exception& e) {
                throw ConfigError("config '" + config_path + "': " + e.what());
            }
            ctx.config_dir = fs::absolute(config_path).parent_path();
        } else {
            ctx.config_dir = fs::current_path();
        }
        ctx.out_dir = out_dir;
        std::error_code ec;
        fs::create_directories(ctx.out_dir, ec);
        if (ec) {
            throw ConfigError("cannot create output directory '" + out_dir + "': " + ec.message());
        }
        commands().at(chosen).second(ctx);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ctx.write_json("manifest.json", {{"subcommand", chosen},
                                         {"seed", seed},
                                         {"config_hash", hex64(fnv1a(ctx.config.dump()))},
                                         {"outputs", ctx.outputs},
                                         {"wall_clock_seconds", wall},
                                         {"threads", threads},
                                         {"version", std::string("gplc ") + gplc::version}});
        for (const auto& o : ctx.outputs) {
            out << (ctx.out_dir / o).string() << "\n";
        }
        return 0;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleBudget& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace gplc::cli
