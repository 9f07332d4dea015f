// Command line front end: `ebound analyze <spec>` and `ebound corpus`.
//
// Exit codes: 0 when the analysis completed (whatever the verdict), 2 for an
// unreadable or invalid spec, config or option, 3 when outputs cannot be
// written.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ebound/errors.hpp"
#include "ebound/pipeline.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kIo = 3;

std::optional<std::string> slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// Splits "a:b:c" into three numbers.
bool triple(const std::string& text, double& a, double& b, double& c) {
    std::istringstream ss(text);
    char s1 = 0, s2 = 0;
    ss >> a >> s1 >> b >> s2 >> c;
    return ss && s1 == ':' && s2 == ':' && ss.peek() == std::char_traits<char>::eof();
}

bool whole(double v) { return v >= 1.0 && v == static_cast<double>(static_cast<std::size_t>(v)); }

int analyze(ebound::AnalysisConfig cfg, const std::string& spec_path, const std::string& config_path,
            const std::string& out_dir, std::optional<std::uint64_t> seed, const std::string& levels,
            const std::string& radii) {
    using namespace ebound;
    std::optional<FunctionHandle> f;
    try {
        auto spec = slurp(spec_path);
        if (!spec) {
            std::cerr << "error: cannot read spec " << spec_path << "\n";
            return kUsage;
        }
        f = parse_function(*spec);
        if (!config_path.empty()) {
            auto text = slurp(config_path);
            if (!text) {
                std::cerr << "error: cannot read config " << config_path << "\n";
                return kUsage;
            }
            cfg = parse_config(*text, cfg);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    if (seed) cfg.sampler.seed = *seed;
    if (!levels.empty()) {
        double lo, hi, n;
        if (!triple(levels, lo, hi, n) || !whole(n) || n < 2) {
            std::cerr << "error: --levels expects lo:hi:count\n";
            return kUsage;
        }
        cfg.level_lo = lo;
        cfg.level_hi = hi;
        cfg.level_count = static_cast<std::size_t>(n);
        cfg.near_count = std::min<std::size_t>(cfg.near_count, cfg.level_count / 2);
        cfg.far_count = std::min<std::size_t>(cfg.far_count, cfg.level_count / 2);
    }
    if (!radii.empty()) {
        double r0, factor, n;
        if (!triple(radii, r0, factor, n) || !whole(n)) {
            std::cerr << "error: --radii expects r0:factor:count\n";
            return kUsage;
        }
        cfg.radius_r0 = r0;
        cfg.radius_factor = factor;
        cfg.radius_count = static_cast<std::size_t>(n);
    }

    AnalysisResult result;
    try {
        result = run_analysis(*f, cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    try {
        write_outputs(out_dir, result);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    std::cout << f->name() << ": " << verdict_name(result.verdict.kind);
    for (const auto& w : result.warnings) std::cout << " [" << w << "]";
    std::cout << "\n";
    return 0;
}

int run_corpus(const ebound::AnalysisConfig& cfg, const std::string& out_dir) {
    using namespace ebound;
    std::filesystem::path root(out_dir);
    std::ostringstream table;
    table << "name,expected,verdict,warnings,match\n";
    int status = 0;
    for (const auto& entry : corpus()) {
        std::string verdict = "error", warnings;
        bool match = false;
        try {
            auto result = run_analysis(parse_function(entry.spec), cfg);
            write_outputs(root / entry.name, result);
            verdict = std::string(verdict_name(result.verdict.kind));
            bool warned = entry.expected_warning.empty();
            for (const auto& w : result.warnings) {
                warnings += (warnings.empty() ? "" : ";") + w;
                warned = warned || w == entry.expected_warning;
            }
            match = result.verdict.kind == entry.expected && warned;
        } catch (const IoError& e) {
            std::cerr << entry.name << ": " << e.what() << "\n";
            status = kIo;
        } catch (const Error& e) {
            std::cerr << entry.name << ": " << e.what() << "\n";
        }
        std::string expected(verdict_name(entry.expected));
        if (!entry.expected_warning.empty()) expected += "+" + entry.expected_warning;
        table << entry.name << "," << expected << "," << verdict << "," << warnings << ","
              << (match ? "yes" : "no") << "\n";
        std::printf("%-18s expected %-24s got %-13s %s\n", entry.name.c_str(), expected.c_str(), verdict.c_str(),
                    match ? "ok" : "MISMATCH");
    }
    std::ofstream os(root / "summary.csv", std::ios::binary);
    os << table.str();
    os.close();
    if (!os) {
        std::cerr << "error: cannot write " << (root / "summary.csv").string() << "\n";
        return kIo;
    }
    return status;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical checks of global Holderian error bounds for semialgebraic functions"};
    app.require_subcommand(1);

    ebound::AnalysisConfig cfg;
    if (const char* env = std::getenv("EBOUND_SEED")) {
        try {
            cfg.sampler.seed = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "error: EBOUND_SEED must be an unsigned integer\n";
            return kUsage;
        }
    }

    std::string spec, config, out = "out", levels, radii;
    std::optional<std::uint64_t> seed;
    auto* an = app.add_subcommand("analyze", "analyze one function spec");
    an->add_option("spec", spec, "function-spec JSON file")->required();
    an->add_option("--config", config, "config JSON file");
    an->add_option("--out", out, "output directory")->capture_default_str();
    an->add_option("--seed", seed, "sampler seed (overrides EBOUND_SEED and the config)");
    an->add_option("--levels", levels, "fiber level grid lo:hi:count");
    an->add_option("--radii", radii, "fiber and cloud radii r0:factor:count");

    std::string corpus_out = "corpus_out";
    auto* co = app.add_subcommand("corpus", "run the built-in corpus");
    co->add_option("--out", corpus_out, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (*an) return analyze(cfg, spec, config, out, seed, levels, radii);
    return run_corpus(cfg, corpus_out);
}
