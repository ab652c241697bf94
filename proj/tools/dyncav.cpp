// dyncav command-line front end.
//
// Subcommands:
//   run          integrate one configuration, write timeseries/spectrum/meta
//   verify       run the self-check battery, write a pass/fail report
//   sweep        run a family of configurations along one axis
//   convergence  re-run at several cut-offs and compare final spectra
//   fit          fit a growth law to a sampled series
//
// Exit codes: 0 success, 2 configuration problem, 3 integration failure,
// 4 verification/fit failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <dyncav/dyncav.hpp>

namespace fs = std::filesystem;
using namespace dyncav;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIntegration = 3;
constexpr int kExitVerify = 4;

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::string out_dir = ".";
    int kmax_override = 0;
    int threads_override = 0;
    double sample_dt_override = 0.0;
    double tmax_override = 0.0;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "JSON configuration file");
    cmd->add_option("--preset", o.preset, "named reference configuration (see `dyncav run --preset list`)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--kmax", o.kmax_override, "override the mode cut-off");
    cmd->add_option("--threads", o.threads_override, "worker threads (default: DYNCAV_THREADS or 1)");
    cmd->add_option("--sample-dt", o.sample_dt_override, "override the sampling interval");
    cmd->add_option("--tmax", o.tmax_override, "override the final time");
}

int env_threads() {
    if (const char* s = std::getenv("DYNCAV_THREADS")) {
        const int n = std::atoi(s);
        if (n >= 1)
            return n;
    }
    return 0;
}

std::string preset_names() {
    std::string s;
    for (const auto& [name, cfg] : presets()) {
        if (!s.empty())
            s += ", ";
        s += name;
    }
    return s;
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg;
    if (!o.preset.empty()) {
        if (!o.config_path.empty())
            throw ConfigError({"--config and --preset are mutually exclusive"});
        const auto p = presets();
        const auto it = p.find(o.preset);
        if (it == p.end())
            throw ConfigError({"unknown preset '" + o.preset + "' (known: " + preset_names() + ")"});
        cfg = it->second;
    } else if (!o.config_path.empty()) {
        cfg = load_config(o.config_path);
    } else {
        throw ConfigError({"either --config or --preset is required"});
    }
    if (o.kmax_override > 0)
        cfg.k_max = o.kmax_override;
    if (o.sample_dt_override > 0.0)
        cfg.sample_interval = o.sample_dt_override;
    if (o.tmax_override > 0.0)
        cfg.t_max = o.tmax_override;
    if (o.threads_override > 0)
        cfg.threads = o.threads_override;
    else if (const int n = env_threads())
        cfg.threads = n;
    cfg.out_dir = o.out_dir;
    const auto v = cfg.violations();
    if (!v.empty())
        throw ConfigError(v);
    return cfg;
}

// Write-then-rename so readers never see a partial file.
void atomic_write(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << contents;
    }
    fs::rename(tmp, path);
}

void write_record(const RunRecord& rec, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream ts, sp;
    write_timeseries_csv(rec, ts);
    write_spectrum_csv(rec, sp);
    atomic_write(dir / "timeseries.csv", ts.str());
    atomic_write(dir / "spectrum.csv", sp.str());
    atomic_write(dir / "meta.json", meta_json(rec).dump(2) + "\n");
}

int cmd_run(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const RunRecord rec = run_simulation(cfg);
    write_record(rec, cfg.out_dir);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "timeseries.csv").string() << " ("
              << rec.rows.size() << " rows, " << rec.steps_accepted << " steps, "
              << rec.wall_seconds << " s)\n";
    return 0;
}

int cmd_verify(const CommonOpts& o) {
    const RunConfig cfg = resolve_config(o);
    const VerifyReport rep = verify_run(cfg);
    const json j = to_json(rep);
    fs::create_directories(cfg.out_dir);
    atomic_write(fs::path(cfg.out_dir) / "verify.json", j.dump(2) + "\n");
    for (const auto& c : rep.checks) {
        std::cout << (c.applicable ? (c.pass ? "PASS " : "FAIL ") : "SKIP ") << c.name;
        if (c.applicable)
            std::cout << "  value=" << c.value << " threshold=" << c.threshold;
        std::cout << "\n";
    }
    return rep.pass ? 0 : kExitVerify;
}

struct SweepOpts {
    std::string axis;
    std::vector<std::string> values;
};

int cmd_sweep(const CommonOpts& o, const SweepOpts& s) {
    if (s.values.empty())
        throw ConfigError({"sweep needs at least one --value"});
    const RunConfig base = resolve_config(o);

    std::ostringstream summary;
    summary << "# dyncav sweep v" << kTimeseriesVersion << "\n";
    summary << "point," << s.axis << ",N_total,E,max_unitarity_defect\n";

    int failures = 0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        RunConfig cfg = base;
        const std::string& val = s.values[i];
        try {
            if (s.axis == "epsilon")
                cfg.motion.epsilon = std::stod(val);
            else if (s.axis == "n")
                cfg.motion.resonance_index = std::stod(val);
            else if (s.axis == "kind")
                cfg.motion.kind = std::stoi(val);
            else if (s.axis == "drive")
                cfg.motion.drive = drive_from_name(val);
            else
                throw ConfigError({"sweep axis must be epsilon, n, kind or drive"});
            const auto v = cfg.violations();
            if (!v.empty())
                throw ConfigError(v);

            const fs::path dir = fs::path(base.out_dir) / (s.axis + "_" + val);
            cfg.out_dir = dir.string();
            const RunRecord rec = run_simulation(cfg);
            write_record(rec, dir);
            const auto& last = rec.rows.back();
            summary << i << ',' << val << ',' << detail::fmt17(last.n_total) << ','
                    << detail::fmt17(last.energy) << ',' << detail::fmt17(max_unitarity_defect(rec))
                    << "\n";
            std::cout << "point " << i << " (" << s.axis << "=" << val << "): ok\n";
        } catch (const std::exception& e) {
            ++failures;
            summary << i << ',' << val << ",failed,failed,failed\n";
            std::cerr << "point " << i << " (" << s.axis << "=" << val << ") failed: " << e.what()
                      << "\n";
        }
    }
    fs::create_directories(base.out_dir);
    atomic_write(fs::path(base.out_dir) / "summary.csv", summary.str());
    return failures == 0 ? 0 : kExitIntegration;
}

int cmd_convergence(const CommonOpts& o, std::vector<int> kmaxes, double threshold) {
    if (kmaxes.size() < 2)
        throw ConfigError({"convergence needs at least two --kmax-list values"});
    const RunConfig base = resolve_config(o);

    std::vector<RunRecord> recs;
    for (int km : kmaxes) {
        RunConfig cfg = base;
        cfg.k_max = km;
        const auto v = cfg.violations();
        if (!v.empty())
            throw ConfigError(v);
        recs.push_back(run_simulation(cfg));
        std::cout << "k_max=" << km << " done (" << recs.back().wall_seconds << " s)\n";
    }

    json pairs = json::array();
    bool stable = true;
    for (std::size_t i = 0; i + 1 < recs.size(); ++i) {
        const auto rep = convergence_compare(recs[i].final_spectrum, recs[i + 1].final_spectrum);
        const bool ok = rep.max_rel_deviation <= threshold;
        stable = stable && ok;
        pairs.push_back(json{{"k_max_a", kmaxes[i]},
                             {"k_max_b", kmaxes[i + 1]},
                             {"common_modes", rep.common_modes},
                             {"max_rel_deviation", rep.max_rel_deviation},
                             {"worst_mode", rep.worst_mode},
                             {"stable", ok}});
        std::cout << "k_max " << kmaxes[i] << " vs " << kmaxes[i + 1]
                  << ": max rel deviation " << rep.max_rel_deviation << " (worst mode "
                  << rep.worst_mode << ") " << (ok ? "stable" : "UNSTABLE") << "\n";
    }
    fs::create_directories(base.out_dir);
    atomic_write(fs::path(base.out_dir) / "convergence.json",
                 json{{"threshold", threshold}, {"stable", stable}, {"pairs", pairs}}.dump(2) +
                     "\n");
    return stable ? 0 : kExitVerify;
}

struct FitOpts {
    std::string quantity = "N_total"; // N_total | E | N_<k>
    std::string model = "linear";     // linear | power
    double t_lo = -1.0, t_hi = -1.0;
};

int cmd_fit(const CommonOpts& o, const FitOpts& f) {
    const RunConfig cfg = resolve_config(o);
    const RunRecord rec = run_simulation(cfg);

    Series series;
    if (f.quantity == "N_total")
        series = series_total(rec);
    else if (f.quantity == "E")
        series = series_energy(rec);
    else if (f.quantity.rfind("N_", 0) == 0)
        series = series_mode(rec, std::stoi(f.quantity.substr(2)));
    else
        throw ConfigError({"fit quantity must be N_total, E or N_<k>"});

    TimeWindow window;
    if (f.t_lo >= 0.0 && f.t_hi > f.t_lo) {
        window = {f.t_lo, f.t_hi};
    } else if (cfg.motion.kind == 2) {
        window = linear_regime_window(cfg.motion.epsilon, cfg.motion.l0);
        window.t_hi = std::min(window.t_hi, cfg.t_max);
    } else {
        window = {0.0, cfg.t_max};
    }

    FitResult r;
    if (f.model == "linear")
        r = linear_fit(series, window);
    else if (f.model == "power")
        r = power_law_fit(series, window);
    else
        throw ConfigError({"fit model must be linear or power"});

    json j{{"quantity", f.quantity},
           {"model", f.model},
           {"window", {{"t_lo", r.fit_window.t_lo}, {"t_hi", r.fit_window.t_hi}}},
           {"n_points", r.n_points},
           {"residual_rms", r.residual_rms}};
    if (f.model == "linear") {
        j["a"] = r.a;
        j["b"] = r.b;
    } else {
        j["alpha"] = r.alpha;
        j["beta"] = r.beta;
    }
    fs::create_directories(cfg.out_dir);
    atomic_write(fs::path(cfg.out_dir) / "fit.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"dyncav: photon creation in a cavity with an oscillating wall"};
    app.require_subcommand(1);

    CommonOpts run_o, verify_o, sweep_o, conv_o, fit_o;
    SweepOpts sweep_s;
    FitOpts fit_f;
    std::vector<int> conv_kmaxes;
    double conv_threshold = 0.01;

    auto* run_cmd = app.add_subcommand("run", "integrate one configuration and write its record");
    add_common(run_cmd, run_o);

    auto* verify_cmd = app.add_subcommand("verify", "run the self-check battery");
    add_common(verify_cmd, verify_o);

    auto* sweep_cmd = app.add_subcommand("sweep", "run a family of configurations along one axis");
    add_common(sweep_cmd, sweep_o);
    sweep_cmd->add_option("--axis", sweep_s.axis, "epsilon | n | kind | drive")->required();
    sweep_cmd->add_option("--value", sweep_s.values, "axis values (repeatable)")->required();

    auto* conv_cmd =
        app.add_subcommand("convergence", "compare final spectra across mode cut-offs");
    add_common(conv_cmd, conv_o);
    conv_cmd->add_option("--kmax-list", conv_kmaxes, "cut-offs to compare (>= 2)")->required();
    conv_cmd->add_option("--threshold", conv_threshold,
                         "max relative deviation still called stable");

    auto* fit_cmd = app.add_subcommand("fit", "fit a growth law to a sampled series");
    add_common(fit_cmd, fit_o);
    fit_cmd->add_option("--quantity", fit_f.quantity, "N_total | E | N_<k>");
    fit_cmd->add_option("--model", fit_f.model, "linear | power");
    fit_cmd->add_option("--t-lo", fit_f.t_lo, "fit window start");
    fit_cmd->add_option("--t-hi", fit_f.t_hi, "fit window end");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run_cmd->parsed())
            return cmd_run(run_o);
        if (verify_cmd->parsed())
            return cmd_verify(verify_o);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_o, sweep_s);
        if (conv_cmd->parsed())
            return cmd_convergence(conv_o, conv_kmaxes, conv_threshold);
        if (fit_cmd->parsed())
            return cmd_fit(fit_o, fit_f);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IntegrationError& e) {
        std::cerr << "error: integration failed at t=" << e.t_reached() << ": " << e.what()
                  << "\n";
        return kExitIntegration;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIntegration;
    }
    return 0;
}
