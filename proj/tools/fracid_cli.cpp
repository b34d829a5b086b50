// Batch front end: generate data, run identifications, dump the symbolic
// elimination equations, and run the validation benchmark. All I/O is CSV
// plus flat key=value config/manifest files; outputs are byte-deterministic
// for a fixed config and seed.

#include "CLI11.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fracid/benchmark.hpp"
#include "fracid/estimators.hpp"
#include "fracid/fracops.hpp"
#include "fracid/opcalc.hpp"
#include "fracid/signals.hpp"
#include "fracid/simulate.hpp"

namespace fs = std::filesystem;
using namespace fracid;

namespace {

// ---------------------------------------------------------------------------
// Flat key=value config files: '#' starts a comment, keys are unique, every
// key must be consumed by the command (unknown keys are rejected).
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

class KeyValues {
  public:
    static KeyValues from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open config file: " + path);
        KeyValues kv;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": empty key");
            if (!kv.kv_.emplace(key, value).second)
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": duplicate key '" + key + "'");
        }
        return kv;
    }

    bool has(const std::string& key) const {
        used_.insert(key);
        return kv_.count(key) > 0;
    }

    std::string get(const std::string& key, const std::string& def) const {
        used_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? def : it->second;
    }

    std::string require(const std::string& key) const {
        used_.insert(key);
        auto it = kv_.find(key);
        if (it == kv_.end())
            throw std::runtime_error("config is missing required key '" +
                                     key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double def) const {
        used_.insert(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? def : parse_double(it->second, key);
    }

    int get_int(const std::string& key, int def) const {
        used_.insert(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(it->second, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != it->second.size())
            throw std::runtime_error("config key '" + key +
                                     "' is not an integer: " + it->second);
        return v;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
        used_.insert(key);
        auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(it->second, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != it->second.size())
            throw std::runtime_error("config key '" + key +
                                     "' is not a non-negative integer: " +
                                     it->second);
        return static_cast<std::uint64_t>(v);
    }

    // Every key present in the file must have been consumed.
    void finish() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : kv_)
            if (!used_.count(k)) unknown.push_back(k);
        if (!unknown.empty()) {
            std::string msg = "unknown config key(s):";
            for (const auto& k : unknown) msg += " '" + k + "'";
            throw std::runtime_error(msg);
        }
    }

    static double parse_double(const std::string& s, const std::string& key) {
        if (s == "inf" || s == "+inf" || s == "infinity")
            return std::numeric_limits<double>::infinity();
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = std::string::npos;
        }
        if (pos != s.size())
            throw std::runtime_error("config key '" + key +
                                     "' is not a number: " + s);
        return v;
    }

  private:
    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

TestSignalKind parse_signal_kind(const std::string& s) {
    if (s == "ramp") return TestSignalKind::Ramp;
    if (s == "sine") return TestSignalKind::Sine;
    if (s == "smooth-step") return TestSignalKind::SmoothStep;
    if (s == "prbs") return TestSignalKind::PrbsSmoothed;
    throw std::runtime_error(
        "signal must be one of ramp|sine|smooth-step|prbs|bump, got: " + s);
}

DerivConvention parse_convention(const std::string& s) {
    if (s == "rl") return DerivConvention::RiemannLiouville;
    if (s == "caputo") return DerivConvention::Caputo;
    throw std::runtime_error("convention must be rl or caputo, got: " + s);
}

ModelSpec first_order_spec() {
    // a1 y' + a0 y = b0 u with a1 normalized to 1: recovers (a0/a1, b0/a1).
    ModelSpec m;
    ModelGroup g;
    g.tag = Tag::zero();
    g.a.terms[1] = ParamPoly::constant(1);
    g.a.terms[0] = ParamPoly::symbol("a0");
    g.b = LaurentPoly::single(0, ParamPoly::symbol("b0"));
    m.groups = {g};
    m.theta1 = {"a0", "b0"};
    return m;
}

struct MethodSpec {
    bool is_diffusion = false;
    bool has_model = false;
    ModelSpec model;
};

MethodSpec spec_for_method(const std::string& method) {
    MethodSpec out;
    if (method == "diffusion") {
        out.is_diffusion = true;
        return out;
    }
    out.has_model = true;
    if (method == "voigt-hom")
        out.model = voigt_model_spec(DerivConvention::RiemannLiouville,
                                     InitRegime::Homogeneous);
    else if (method == "voigt-rl-identify")
        out.model = voigt_model_spec(DerivConvention::RiemannLiouville,
                                     InitRegime::InhomogeneousIdentify);
    else if (method == "voigt-rl-eliminate")
        out.model = voigt_model_spec(DerivConvention::RiemannLiouville,
                                     InitRegime::InhomogeneousEliminate);
    else if (method == "voigt-caputo-identify")
        out.model = voigt_model_spec(DerivConvention::Caputo,
                                     InitRegime::InhomogeneousIdentify);
    else if (method == "voigt-caputo-eliminate")
        out.model = voigt_model_spec(DerivConvention::Caputo,
                                     InitRegime::InhomogeneousEliminate);
    else if (method == "first-order")
        out.model = first_order_spec();
    else
        throw std::runtime_error(
            "method must be one of voigt-hom|voigt-rl-identify|"
            "voigt-rl-eliminate|voigt-caputo-identify|voigt-caputo-eliminate|"
            "first-order|diffusion, got: " +
            method);
    return out;
}

IdentOpts opts_from_config(const KeyValues& cfg) {
    IdentOpts o;
    o.n_extra = cfg.get_int("n_extra", -1);
    o.eval_start = cfg.get_double("eval_start", -1.0);
    o.eval_points = cfg.get_int("eval_points", 25);
    o.sv_threshold = cfg.get_double("sv_threshold", 1e-10);
    o.coherence_threshold = cfg.get_double("coherence_threshold", 1e-2);
    return o;
}

void write_manifest(const fs::path& path,
                    const std::vector<std::pair<std::string, std::string>>&
                        entries) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (f == nullptr)
        throw std::runtime_error("cannot write manifest: " + path.string());
    for (const auto& [k, v] : entries)
        std::fprintf(f, "%s = %s\n", k.c_str(), v.c_str());
    std::fclose(f);
}

std::string dstr(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const KeyValues& cfg, const fs::path& out,
                 std::optional<std::uint64_t> seed_flag) {
    const std::string model = cfg.get("model", "voigt");
    const double T = KeyValues::parse_double(cfg.require("T"), "T");
    const double dt = KeyValues::parse_double(cfg.require("dt"), "dt");
    const std::size_t n = grid_samples(T, dt);
    const double snr_db =
        cfg.get_double("snr_db", std::numeric_limits<double>::infinity());
    const std::uint64_t seed =
        seed_flag ? *seed_flag : cfg.get_u64("seed", 1);

    std::vector<std::pair<std::string, std::string>> man;
    man.emplace_back("command", "simulate");
    man.emplace_back("model", model);

    SampledSignal u, y;
    if (model == "voigt") {
        const std::string signal = cfg.get("signal", "sine");
        TestSignalParams tp;
        tp.amplitude = cfg.get_double("amplitude", 1.0);
        tp.frequency = cfg.get_double("frequency", 1.0);
        tp.rise_time = cfg.get_double("rise_time", -1.0);
        tp.chips = cfg.get_int("chips", 31);
        tp.seed = cfg.get_u64("signal_seed", 1);
        VoigtParams p;
        p.alpha = cfg.get_double("alpha", 0.5);
        p.E0 = cfg.get_double("E0", 2.0);
        p.E1 = cfg.get_double("E1", 1.0);
        p.convention = parse_convention(cfg.get("convention", "rl"));
        const double init = cfg.get_double("init", 0.0);

        SampledSignal eps = test_signal(parse_signal_kind(signal), T, dt, tp);
        if (init != 0.0) {
            if (p.convention == DerivConvention::RiemannLiouville) {
                SampledSignal mode = rl_singular_mode(dt, n, p.alpha);
                for (std::size_t i = 0; i < n; ++i)
                    eps.values[i] += init * mode.values[i];
            } else {
                for (std::size_t i = 0; i < n; ++i) eps.values[i] += init;
            }
            p.init = {init};
        } else if (p.convention == DerivConvention::Caputo) {
            p.init = {0.0};
        }
        u = eps;
        y = voigt_forward(eps, p);
        man.emplace_back("signal", signal);
        man.emplace_back("alpha", dstr(p.alpha));
        man.emplace_back("E0", dstr(p.E0));
        man.emplace_back("E1", dstr(p.E1));
        man.emplace_back("convention", p.convention ==
                                               DerivConvention::Caputo
                                           ? "caputo"
                                           : "rl");
        man.emplace_back("init", dstr(init));
    } else if (model == "diffusion") {
        const std::string signal = cfg.get("signal", "bump");
        WaveParams wp;
        wp.alpha = cfg.get_double("alpha", 2.0);
        wp.c = cfg.get_double("c", 0.5);
        SampledSignal h;
        if (signal == "bump") {
            const double w = cfg.get_double("pulse_width", 2.0);
            const double A = cfg.get_double("amplitude", 1.0);
            if (!(w > 0.0))
                throw std::runtime_error("pulse_width must be positive");
            h = sample_function(dt, n, [w, A](double t) {
                return t < w ? 0.5 * A *
                                   (1.0 - std::cos(2.0 * std::numbers::pi *
                                                   t / w))
                             : 0.0;
            });
            man.emplace_back("pulse_width", dstr(w));
        } else {
            TestSignalParams tp;
            tp.amplitude = cfg.get_double("amplitude", 1.0);
            tp.frequency = cfg.get_double("frequency", 1.0);
            tp.rise_time = cfg.get_double("rise_time", -1.0);
            tp.chips = cfg.get_int("chips", 31);
            tp.seed = cfg.get_u64("signal_seed", 1);
            h = test_signal(parse_signal_kind(signal), T, dt, tp);
        }
        u = h;
        y = diffusion_wave_forward(h, wp);
        man.emplace_back("signal", signal);
        man.emplace_back("alpha", dstr(wp.alpha));
        man.emplace_back("c", dstr(wp.c));
    } else {
        throw std::runtime_error("model must be voigt or diffusion, got: " +
                                 model);
    }
    cfg.finish();

    if (std::isfinite(snr_db)) {
        u = add_white_noise(u, snr_db, seed);
        y = add_white_noise(y, snr_db, seed + 1);
    }

    man.emplace_back("T", dstr(T));
    man.emplace_back("dt", dstr(dt));
    man.emplace_back("samples", std::to_string(n));
    man.emplace_back("snr_db", std::isfinite(snr_db) ? dstr(snr_db) : "inf");
    man.emplace_back("seed", std::to_string(seed));
    man.emplace_back("input_file", "u.csv");
    man.emplace_back("output_file", "y.csv");

    fs::create_directories(out);
    write_signal_csv((out / "u.csv").string(), u);
    write_signal_csv((out / "y.csv").string(), y);
    write_manifest(out / "manifest.txt", man);
    std::cout << "wrote " << (out / "u.csv").string() << ", "
              << (out / "y.csv").string() << ", "
              << (out / "manifest.txt").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// identify
// ---------------------------------------------------------------------------

int cmd_identify(const KeyValues& cfg, const fs::path& out) {
    const std::string method = cfg.require("method");
    const std::string input = cfg.require("input");
    const std::string output = cfg.require("output");
    const std::string result_name = cfg.get("result", "ident.csv");
    const IdentOpts opts = opts_from_config(cfg);

    KnownWaveQuantity known = KnownWaveQuantity::RatioOnly;
    double known_value = 0.0;
    MethodSpec ms = spec_for_method(method);
    if (ms.is_diffusion) {
        const std::string k = cfg.get("known", "ratio-only");
        if (k == "distance")
            known = KnownWaveQuantity::Distance;
        else if (k == "speed")
            known = KnownWaveQuantity::Speed;
        else if (k == "ratio-only")
            known = KnownWaveQuantity::RatioOnly;
        else
            throw std::runtime_error(
                "known must be distance|speed|ratio-only, got: " + k);
        known_value = cfg.get_double("known_value", 0.0);
    }
    cfg.finish();

    const SampledSignal u = read_signal_csv(input);
    const SampledSignal y = read_signal_csv(output);

    IdentResult res;
    if (method == "voigt-hom")
        res = identify_voigt_hom(u, y, opts);
    else if (method == "voigt-rl-identify")
        res = identify_voigt_inhom_rl(u, y, InitHandling::IdentifyInit, opts);
    else if (method == "voigt-rl-eliminate")
        res = identify_voigt_inhom_rl(u, y, InitHandling::EliminateInit, opts);
    else if (method == "voigt-caputo-identify")
        res = identify_voigt_inhom_caputo(u, y, InitHandling::IdentifyInit,
                                          opts);
    else if (method == "voigt-caputo-eliminate")
        res = identify_voigt_inhom_caputo(u, y, InitHandling::EliminateInit,
                                          opts);
    else if (method == "first-order")
        res = identify_general(ms.model, u, y, opts);
    else  // diffusion
        res = identify_diffusion_wave(u, y, known, known_value, opts);

    fs::create_directories(out);
    res.write_csv((out / result_name).string());

    for (const auto& name : res.param_names)
        std::cout << name << " = " << dstr(res.final_estimates.at(name))
                  << "\n";
    std::cout << "final_time = " << dstr(res.final_time) << "\n"
              << "coherence = " << dstr(res.coherence) << "\n"
              << "min_singular_value = " << dstr(res.min_singular_value)
              << "\n";
    for (const auto& fl : res.flags)
        std::cerr << "warning: " << fl << "\n";

    if (res.coherence > opts.coherence_threshold) {
        std::cerr << "error: coherence residual " << res.coherence
                  << " exceeds threshold " << opts.coherence_threshold
                  << "\n";
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// lower
// ---------------------------------------------------------------------------

int cmd_lower(const KeyValues& cfg) {
    const std::string method = cfg.get("model", "voigt-hom");
    cfg.finish();
    MethodSpec ms = spec_for_method(method);
    const OpExpr e = ms.is_diffusion ? diffusion_elimination_equation()
                                     : elimination_equation(ms.model);
    std::cout << pretty(e) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

int cmd_benchmark(const KeyValues& cfg, bool have_config,
                  const fs::path& out) {
    std::vector<int> cases;
    double scale = 1.0;
    std::string report_name = "report.txt";
    if (have_config) {
        const std::string list = cfg.get("cases", "1,2,3,4,5,6,7,8");
        std::stringstream ss(list);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            cases.push_back(std::stoi(item));
        }
        if (cases.empty())
            throw std::runtime_error("empty benchmark case selection");
        scale = cfg.get_double("tolerance_scale", 1.0);
        report_name = cfg.get("report", "report.txt");
        cfg.finish();
    } else {
        cases = {1, 2, 3, 4, 5, 6, 7, 8};
    }

    std::vector<CriterionResult> results;
    for (int c : cases) {
        CriterionResult r = run_criterion(c, scale);
        std::fprintf(stderr, "criterion %d [%s]: %.3f s\n", r.index,
                     r.name.c_str(), r.seconds);
        results.push_back(std::move(r));
    }
    const std::string report = benchmark_report(results);
    std::cout << report;
    fs::create_directories(out);
    std::ofstream rf(out / report_name, std::ios::binary);
    if (!rf)
        throw std::runtime_error("cannot write report: " +
                                 (out / report_name).string());
    rf << report;
    rf.close();

    for (const auto& r : results)
        if (!r.pass) return 2;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "fracid — identification of linear systems with fractional "
        "derivatives from sampled signals"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path,
                                  "key=value config file");
        if (config_required) c->required();
        sub->add_option("--out", out_dir, "output directory (default: .)");
        sub->add_option("--seed", seed_value, "seed override")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* sim = app.add_subcommand("simulate",
                                       "generate model data + manifest");
    add_common(sim, true);
    CLI::App* ident = app.add_subcommand("identify",
                                         "estimate parameters from CSVs");
    add_common(ident, true);
    CLI::App* low = app.add_subcommand(
        "lower", "print the normalized symbolic elimination equation");
    add_common(low, true);
    CLI::App* bench = app.add_subcommand("benchmark",
                                         "run the validation suite");
    add_common(bench, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const fs::path out(out_dir);
        if (sim->parsed()) {
            KeyValues cfg = KeyValues::from_file(config_path);
            return cmd_simulate(cfg, out,
                                seed_given
                                    ? std::optional<std::uint64_t>(seed_value)
                                    : std::nullopt);
        }
        if (ident->parsed()) {
            KeyValues cfg = KeyValues::from_file(config_path);
            return cmd_identify(cfg, out);
        }
        if (low->parsed()) {
            KeyValues cfg = KeyValues::from_file(config_path);
            return cmd_lower(cfg);
        }
        if (bench->parsed()) {
            const bool have_config = !config_path.empty();
            KeyValues cfg =
                have_config ? KeyValues::from_file(config_path) : KeyValues{};
            return cmd_benchmark(cfg, have_config, out);
        }
    } catch (const SingularSystemError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
