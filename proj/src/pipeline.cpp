#include "ebound/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ebound/errors.hpp"
#include "ebound/random.hpp"

namespace ebound {

using nlohmann::json;

namespace {

// Calls v(section, key, field) for every configurable field; section is
// empty for top-level keys.
template <class C, class V>
void visit_fields(C& c, V&& v) {
    v("", "seed", c.sampler.seed);
    v("", "member_tol", c.member_tol);

    v("sampler", "multistart_count", c.sampler.multistart_count);
    v("sampler", "max_iters", c.sampler.max_iters);
    v("sampler", "penalty_weight", c.sampler.penalty_weight);
    v("sampler", "penalty_growth", c.sampler.penalty_growth);
    v("sampler", "penalty_rounds", c.sampler.penalty_rounds);
    v("sampler", "armijo", c.sampler.armijo);
    v("sampler", "backtrack", c.sampler.backtrack);
    v("sampler", "box_half_width", c.sampler.box_half_width);

    v("levels", "lo", c.level_lo);
    v("levels", "hi", c.level_hi);
    v("levels", "count", c.level_count);
    v("levels", "near_count", c.near_count);
    v("levels", "far_count", c.far_count);

    v("radii", "r0", c.radius_r0);
    v("radii", "factor", c.radius_factor);
    v("radii", "count", c.radius_count);

    v("fiber", "line_count", c.fiber.line_count);
    v("fiber", "newton_starts", c.fiber.newton_starts);
    v("fiber", "distance_candidates", c.fiber.distance_candidates);
    v("fiber", "slope_candidates", c.fiber.slope_candidates);
    v("fiber", "tangent_iters", c.fiber.tangent_iters);
    v("fiber", "sweep_steps", c.fiber.sweep_steps);
    v("fiber", "level_rel_tol", c.fiber.level_rel_tol);
    v("fiber", "divergence_factor", c.fiber.divergence_factor);
    v("fiber", "zero_band", c.fiber.zero_band);
    v("fiber", "radius_stability", c.fiber.radius_stability);
    v("fiber", "min_fit_levels", c.fiber.min_fit_levels);
    v("fiber", "min_hit_fraction", c.fiber.min_hit_fraction);
    v("fiber", "t_max", c.fiber.t_max);
    v("fiber", "escape_starts", c.fiber.escape_starts);

    v("kinf", "levels", c.kinf_levels);
    v("kinf", "radii", c.kinf_radii);
    v("kinf", "eps_rel", c.kinf.eps_rel);
    v("kinf", "zero_band", c.kinf.zero_band);
    v("kinf", "decay_factor", c.kinf.decay_factor);
    v("kinf", "ps_floor", c.kinf.ps_floor);
    v("kinf", "dense_fraction", c.kinf.dense_fraction);
    v("kinf", "starts", c.kinf.starts);
    v("kinf", "lm_iters", c.kinf.lm_iters);

    v("cloud", "per_annulus", c.cloud.per_annulus);

    v("fits", "holder_alpha", c.holder_alpha);
    v("fits", "holder_beta", c.holder_beta);
    v("fits", "hormander_alpha", c.hormander_alpha);
    v("fits", "hormander_beta", c.hormander_beta);
    v("fits", "stability_margin", c.stability_margin);
}

json& slot(json& root, const char* section, const char* key) {
    return *section ? root[section][key] : root[key];
}

template <class T>
void read_value(const json& j, T& out, const std::string& where) {
    try {
        if constexpr (std::is_same_v<T, std::vector<double>>) {
            if (!j.is_array()) throw ParseError("'" + where + "' must be an array of numbers", 0);
            out.clear();
            for (const auto& e : j) {
                if (!e.is_number()) throw ParseError("'" + where + "' must be an array of numbers", 0);
                out.push_back(e.get<double>());
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) throw ParseError("'" + where + "' must be a number", 0);
            out = j.get<T>();
        } else {
            if (!j.is_number_integer()) throw ParseError("'" + where + "' must be an integer", 0);
            if (std::is_unsigned_v<T> && j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)
                throw ParseError("'" + where + "' must be non-negative", 0);
            out = j.get<T>();
        }
    } catch (const json::exception& e) {
        throw ParseError("'" + where + "': " + e.what(), 0);
    }
}

json point_json(const Point& p) { return json(p); }

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json witness_json(const std::vector<Witness>& ws) {
    json a = json::array();
    for (const auto& w : ws) a.push_back({{"x", point_json(w.x)}, {"f", w.f}, {"d", w.d}, {"radius", w.radius}});
    return a;
}

json decay_witness_json(const std::vector<DecayCell>& cells) {
    json a = json::array();
    for (const auto& c : cells) a.push_back({{"radius", c.radius}, {"x", point_json(c.at)}, {"s", opt(c.s)}});
    return a;
}

json trend_json(const TrendVerdict& v) {
    json ev = json::array();
    for (const auto& e : v.evidence) ev.push_back(opt(e));
    return {{"trend", trend_name(v.kind)}, {"evidence", ev}, {"witness", witness_json(v.witness)}, {"note", v.note}};
}

std::string_view fit_error_name(FitError::Kind k) {
    switch (k) {
        case FitError::Kind::not_radius_stable: return "not_radius_stable";
        case FitError::Kind::degenerate_window: return "degenerate_window";
        case FitError::Kind::nothing_to_fit: return "nothing_to_fit";
        case FitError::Kind::bad_input: return "bad_input";
    }
    return "?";
}

json exponent_json(const FiberProfile& p, ProfileKind which, const FiberConfig& cfg) {
    try {
        auto e = fit_exponent(p, which, cfg);
        return {{"c", e.c}, {"q", e.q}, {"r2", e.r2}, {"t_lo", e.t_lo}, {"t_hi", e.t_hi}, {"used", e.used}};
    } catch (const FitError& e) {
        return {{"error", fit_error_name(e.kind())}, {"message", e.what()}};
    }
}

template <class Fit>
json fit_json(const Fit& f) {
    json support = json::array();
    for (const auto& p : f.support) support.push_back(point_json(p));
    return {{"c", f.c},         {"alpha", f.alpha},           {"beta", f.beta},
            {"fill", f.fill},   {"max_violation", f.max_violation}, {"c_previous", opt(f.c_previous)},
            {"stable", f.stable}, {"used", f.used},           {"support", support}};
}

class Stopwatch {
public:
    double lap() {
        auto now = std::chrono::steady_clock::now();
        double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

}  // namespace

AnalysisConfig parse_config(std::string_view text, AnalysisConfig base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid config JSON: ") + e.what(),
                         e.byte > 0 ? static_cast<std::size_t>(e.byte - 1) : 0);
    }
    if (!j.is_object()) throw ParseError("config must be a JSON object", 0);

    std::set<std::string> known{"threads"};
    visit_fields(base, [&](const char* section, const char* key, auto&) {
        known.insert(*section ? std::string(section) + "." + key : std::string(key));
        if (*section) known.insert(section);
    });
    for (const auto& [k, v] : j.items()) {
        if (!known.count(k)) throw ParseError("unknown config key '" + k + "'", 0);
        if (v.is_object()) {
            for (const auto& [k2, v2] : v.items())
                if (!known.count(k + "." + k2)) throw ParseError("unknown config key '" + k + "." + k2 + "'", 0);
        }
    }
    if (j.contains("threads")) read_value(j["threads"], base.sampler.threads, "threads");
    visit_fields(base, [&](const char* section, const char* key, auto& field) {
        const json* node = &j;
        if (*section) {
            if (!j.contains(section)) return;
            if (!j[section].is_object()) throw ParseError(std::string("'") + section + "' must be an object", 0);
            node = &j[section];
        }
        if (node->contains(key))
            read_value((*node)[key], field, *section ? std::string(section) + "." + key : std::string(key));
    });
    return base;
}

std::string config_to_json(const AnalysisConfig& cfg) {
    json j = json::object();
    visit_fields(cfg, [&](const char* section, const char* key, const auto& field) { slot(j, section, key) = field; });
    return j.dump(2);
}

AnalysisResult run_analysis(const FunctionHandle& f, const AnalysisConfig& cfg) {
    AnalysisResult out;
    Stopwatch clock;
    json timings;

    FiberConfig fcfg = cfg.fiber;
    fcfg.sampler = cfg.sampler;
    fcfg.member_tol = cfg.member_tol;
    KinfConfig kcfg = cfg.kinf;
    kcfg.sampler = cfg.sampler;
    CloudConfig ccfg = cfg.cloud;
    ccfg.sampler = cfg.sampler;
    ccfg.member_tol = cfg.member_tol;

    auto grid = LevelGrid::geometric(cfg.level_lo, cfg.level_hi, cfg.level_count, cfg.near_count, cfg.far_count);
    auto radii = geometric_radii(cfg.radius_r0, cfg.radius_factor, cfg.radius_count);
    auto s = make_sublevel(f, cfg.member_tol, radii.back(), cfg.sampler);
    timings["anchors"] = clock.lap();

    auto profile = fiber_profile(s, grid, radii, fcfg);
    timings["fiber_profile"] = clock.lap();
    auto near = classify_near(profile, fcfg);
    auto far = classify_far(profile, s, fcfg);
    timings["trends"] = clock.lap();
    json exponents = {{"mu", exponent_json(profile, ProfileKind::mu_near_zero, fcfg)},
                      {"phi", exponent_json(profile, ProfileKind::phi_near_zero, fcfg)}};

    auto kinf = detect_kinf(f, cfg.kinf_levels, cfg.kinf_radii, kcfg);
    std::vector<PSVerdict> ps;
    for (const auto& scan : kinf.levels)
        if (scan.level >= 0.0) ps.push_back(palais_smale_from_scan(f, scan, kcfg));
    timings["kinf"] = clock.lap();

    // Fiber maximizers at the largest radius are the worst-case candidates.
    std::vector<Point> extra;
    for (const auto& p : profile.mu_witness.back())
        if (!p.empty()) extra.push_back(p);
    auto cloud = build_cloud(s, radii, ccfg, extra);
    timings["cloud"] = clock.lap();

    std::optional<HolderFit> holder;
    json holder_j, hormander_j;
    try {
        holder = fit_holder(cloud, cfg.holder_alpha, cfg.holder_beta, cfg.stability_margin);
        holder_j = fit_json(*holder);
    } catch (const FitError& e) {
        holder_j = {{"error", fit_error_name(e.kind())}, {"message", e.what()}};
    }
    try {
        hormander_j = fit_json(fit_hormander(cloud, cfg.hormander_alpha, cfg.hormander_beta, cfg.stability_margin));
    } catch (const FitError& e) {
        hormander_j = {{"error", fit_error_name(e.kind())}, {"message", e.what()}};
    }
    timings["fits"] = clock.lap();

    out.verdict = global_verdict(near, far, ps, holder);
    out.warnings = kinf.warnings;
    for (const auto& w : out.verdict.warnings) out.warnings.push_back(w);

    json report;
    report["function"] = json::parse(to_spec_json(f));
    report["function"]["infix"] = to_infix(*f.root());
    report["config"] = json::parse(config_to_json(cfg));
    report["constants"] = {{"tie_tol", default_tie_tol}, {"selection_cap", default_selection_cap}};

    json prof;
    prof["levels"] = grid.levels;
    prof["radii"] = radii;
    prof["near_window"] = {grid.near_begin, grid.near_end};
    prof["far_window"] = {grid.far_begin, grid.far_end};
    prof["near"] = trend_json(near);
    prof["far"] = trend_json(far);
    prof["exponents"] = exponents;
    report["profiles"] = prof;

    json kj;
    kj["levels"] = cfg.kinf_levels;
    kj["radii"] = cfg.kinf_radii;
    kj["flagged"] = kinf.flagged;
    json undetermined = json::array(), witnesses = json::array();
    for (const auto& scan : kinf.levels) {
        if (scan.undetermined) undetermined.push_back(scan.level);
        if (scan.flagged)
            witnesses.push_back({{"level", scan.level}, {"eps", scan.eps}, {"cells", decay_witness_json(scan.witness)}});
    }
    kj["undetermined"] = undetermined;
    kj["witnesses"] = witnesses;
    report["kinf"] = kj;

    json psj = json::array();
    for (const auto& p : ps)
        psj.push_back({{"level", p.level},
                       {"status", ps_status_name(p.status)},
                       {"inner_min_slope", opt(p.inner_min_slope)},
                       {"witness", decay_witness_json(p.witness)},
                       {"note", p.note}});
    report["palais_smale"] = psj;

    std::size_t in_s = 0;
    for (const auto& p : cloud.points) in_s += p.in_s ? 1 : 0;
    report["cloud"] = {{"scales", cloud.scales},     {"seed", cloud.seed},         {"per_annulus", cloud.per_annulus},
                       {"points", cloud.points.size()}, {"in_s", in_s},           {"imported", cloud.imported},
                       {"excluded", cloud.excluded}};
    report["holder"] = holder_j;
    report["hormander"] = hormander_j;

    report["verdict"] = {{"kind", verdict_name(out.verdict.kind)},
                         {"reasons", out.verdict.reasons},
                         {"witness", witness_json(out.verdict.witness)}};
    report["warnings"] = out.warnings;

    out.report_json = report.dump(2) + "\n";
    out.profiles_csv = profile_csv(profile);
    out.decay_csv = decay_csv(kinf);
    timings["report"] = clock.lap();
    out.timings_json = timings.dump(2) + "\n";
    return out;
}

void write_outputs(const std::filesystem::path& dir, const AnalysisResult& result) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    auto put = [&](const char* name, const std::string& text) {
        auto path = dir / name;
        std::ofstream os(path, std::ios::binary);
        os << text;
        os.close();
        if (!os) throw IoError("cannot write " + path.string());
    };
    put("report.json", result.report_json);
    put("profiles.csv", result.profiles_csv);
    put("decay.csv", result.decay_csv);
    put("timings.json", result.timings_json);
}

namespace {

std::string number(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// x^T (B^T B + I) x for a fixed 2 x 2 Gaussian B.
std::string pd_quadratic_spec() {
    Rng rng(0x5EED0F0DULL);
    double b[2][2];
    for (auto& row : b)
        for (double& v : row) v = rng.normal();
    double a[2][2];
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) a[i][j] = (i == j ? 1.0 : 0.0) + b[0][i] * b[0][j] + b[1][i] * b[1][j];
    std::string e = number(a[0][0]) + "*x0^2 + (" + number(2.0 * a[0][1]) + ")*x0*x1 + " + number(a[1][1]) + "*x1^2";
    return json{{"name", "pd_quadratic_2d"}, {"arity", 2}, {"expr", e}}.dump();
}

std::string infix_spec(const char* name, int arity, const char* expr) {
    return json{{"name", name}, {"arity", arity}, {"expr", expr}}.dump();
}

}  // namespace

std::vector<CorpusEntry> corpus() {
    return {
        {"x_over_1px2", infix_spec("x_over_1px2", 1, "x0/(1+x0^2)"), VerdictKind::fails_near, ""},
        {"x_over_sqrt1px2", infix_spec("x_over_sqrt1px2", 1, "x0/sqrt(1+x0^2)"), VerdictKind::fails_far, ""},
        {"ha", infix_spec("ha", 2, "(x0*x1-1)^2+(x0-1)^2"), VerdictKind::fails_far, ""},
        {"x_over_1py2", infix_spec("x_over_1py2", 2, "x0/(1+x1^2)"), VerdictKind::fails_near, "kinf_dense"},
        {"square_1d", infix_spec("square_1d", 1, "x0^2"), VerdictKind::holds, ""},
        {"pd_quadratic_2d", pd_quadratic_spec(), VerdictKind::holds, ""},
    };
}

}  // namespace ebound
