// Run configuration, result records and their on-disk formats.
//
// Config: JSON, unit-free numbers (natural units), field names follow the
// usual symbols (l0, epsilon, kind, n, k_max).
// Timeseries CSV: versioned header line, then
//   t,N_total,E,unitarity_defect,N_1..N_k
// with 17 significant digits so records round-trip bit-faithfully.

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cavity.hpp"
#include "coupling.hpp"
#include "evolve.hpp"

namespace dyncav {

using json = nlohmann::json;

enum class ObservableMode { every_sample, whole_period };

struct RunConfig {
    CavityMotion motion;
    int k_max = 10;
    double t_max = 10.0;
    double sample_interval = 0.1;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double max_step = 0.0;
    int threads = 1;
    bool shared_steps = true;
    ObservableMode observable_mode = ObservableMode::every_sample;
    std::string out_dir = ".";

    IntegratorConfig integrator() const {
        IntegratorConfig ic;
        ic.rel_tol = rel_tol;
        ic.abs_tol = abs_tol;
        ic.max_step = max_step;
        ic.sample_interval = sample_interval;
        ic.threads = threads;
        ic.shared_steps = shared_steps;
        return ic;
    }

    // All violated constraints at once, so a bad config is fixable in one
    // round trip.
    std::vector<std::string> violations() const {
        std::vector<std::string> v;
        if (!(motion.l0 > 0.0))
            v.push_back("motion.l0 must be > 0");
        if (!(motion.epsilon >= 0.0 && motion.epsilon < 0.5))
            v.push_back("motion.epsilon must be in [0, 0.5)");
        if (motion.kind < 1 || motion.kind > 3)
            v.push_back("motion.kind must be 1, 2 or 3");
        if (!(motion.resonance_index > 0.0))
            v.push_back("motion.n must be > 0");
        if (motion.drive == Drive::true_resonance && motion.kind != 2)
            v.push_back("drive true_resonance requires motion.kind = 2");
        if (motion.drive == Drive::explicit_freq && !(motion.omega_explicit > 0.0))
            v.push_back("explicit drive requires omega_cav > 0");
        if (k_max < 1)
            v.push_back("k_max must be >= 1");
        if (!(t_max > 0.0))
            v.push_back("t_max must be > 0");
        if (!(sample_interval > 0.0))
            v.push_back("sample_interval must be > 0");
        if (!(rel_tol > 0.0))
            v.push_back("rel_tol must be > 0");
        if (!(abs_tol > 0.0))
            v.push_back("abs_tol must be > 0");
        if (max_step < 0.0)
            v.push_back("max_step must be >= 0");
        if (threads < 1)
            v.push_back("threads must be >= 1");
        return v;
    }
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::vector<std::string>& violations)
        : std::runtime_error(join(violations)), violations_(violations) {}
    const std::vector<std::string>& violations() const { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid configuration:";
        for (const auto& x : v)
            s += "\n  - " + x;
        return s;
    }
    std::vector<std::string> violations_;
};

inline std::string drive_name(Drive d) {
    switch (d) {
    case Drive::standard: return "standard";
    case Drive::true_resonance: return "true_resonance";
    case Drive::explicit_freq: return "explicit";
    }
    return "standard";
}

inline Drive drive_from_name(const std::string& s) {
    if (s == "standard") return Drive::standard;
    if (s == "true_resonance") return Drive::true_resonance;
    if (s == "explicit") return Drive::explicit_freq;
    throw ConfigError({"unknown drive '" + s + "' (expected standard|true_resonance|explicit)"});
}

inline json to_json(const RunConfig& c) {
    json m = {
        {"l0", c.motion.l0},
        {"epsilon", c.motion.epsilon},
        {"kind", c.motion.kind},
        {"n", c.motion.resonance_index},
        {"drive", drive_name(c.motion.drive)},
    };
    if (c.motion.drive == Drive::explicit_freq)
        m["omega_cav"] = c.motion.omega_explicit;
    return json{
        {"motion", m},
        {"k_max", c.k_max},
        {"t_max", c.t_max},
        {"sample_interval", c.sample_interval},
        {"rel_tol", c.rel_tol},
        {"abs_tol", c.abs_tol},
        {"max_step", c.max_step},
        {"threads", c.threads},
        {"shared_steps", c.shared_steps},
        {"observable_mode",
         c.observable_mode == ObservableMode::every_sample ? "every_sample" : "whole_period"},
        {"out_dir", c.out_dir},
    };
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        const json& m = j.at("motion");
        c.motion.l0 = m.at("l0").get<double>();
        c.motion.epsilon = m.at("epsilon").get<double>();
        c.motion.kind = m.at("kind").get<int>();
        c.motion.resonance_index = m.value("n", 1.0);
        c.motion.drive = drive_from_name(m.value("drive", std::string("standard")));
        c.motion.omega_explicit = m.value("omega_cav", 0.0);
        c.k_max = j.at("k_max").get<int>();
        c.t_max = j.at("t_max").get<double>();
        c.sample_interval = j.value("sample_interval", 0.1);
        c.rel_tol = j.value("rel_tol", 1e-9);
        c.abs_tol = j.value("abs_tol", 1e-12);
        c.max_step = j.value("max_step", 0.0);
        c.threads = j.value("threads", 1);
        c.shared_steps = j.value("shared_steps", true);
        const std::string om = j.value("observable_mode", std::string("every_sample"));
        if (om == "every_sample")
            c.observable_mode = ObservableMode::every_sample;
        else if (om == "whole_period")
            c.observable_mode = ObservableMode::whole_period;
        else
            throw ConfigError({"unknown observable_mode '" + om + "'"});
        c.out_dir = j.value("out_dir", std::string("."));
    } catch (const json::exception& e) {
        throw ConfigError({std::string("malformed config: ") + e.what()});
    }
    const auto v = c.violations();
    if (!v.empty())
        throw ConfigError(v);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError({"cannot read config file '" + path + "'"});
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

inline constexpr int kTimeseriesVersion = 1;

struct TimeseriesRow {
    double t = 0.0;
    double n_total = 0.0;
    double energy = 0.0;
    double unitarity_defect = 0.0;
    std::vector<double> n_modes; // N_1..N_kmax
};

struct RunRecord {
    RunConfig config;
    std::vector<TimeseriesRow> rows;
    std::vector<double> final_spectrum;
    double final_time = 0.0;
    long steps_accepted = 0;
    long steps_rejected = 0;
    double wall_seconds = 0.0;
    int format_version = kTimeseriesVersion;
};

namespace detail {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

inline void write_timeseries_csv(const RunRecord& rec, std::ostream& out) {
    out << "# dyncav timeseries v" << rec.format_version << "\n";
    out << "t,N_total,E,unitarity_defect";
    for (std::size_t k = 1; k <= rec.final_spectrum.size(); ++k)
        out << ",N_" << k;
    out << "\n";
    for (const auto& row : rec.rows) {
        out << detail::fmt17(row.t) << ',' << detail::fmt17(row.n_total) << ','
            << detail::fmt17(row.energy) << ',' << detail::fmt17(row.unitarity_defect);
        for (double nk : row.n_modes)
            out << ',' << detail::fmt17(nk);
        out << "\n";
    }
}

inline void write_spectrum_csv(const RunRecord& rec, std::ostream& out) {
    out << "# dyncav spectrum v" << rec.format_version << "\n";
    out << "k,N_k\n";
    for (std::size_t k = 0; k < rec.final_spectrum.size(); ++k)
        out << (k + 1) << ',' << detail::fmt17(rec.final_spectrum[k]) << "\n";
}

inline json meta_json(const RunRecord& rec) {
    return json{
        {"format_version", rec.format_version},
        {"config", to_json(rec.config)},
        {"final_time", rec.final_time},
        {"steps_accepted", rec.steps_accepted},
        {"steps_rejected", rec.steps_rejected},
        {"wall_seconds", rec.wall_seconds},
    };
}

inline int parse_version_line(const std::string& line, const char* kind) {
    const std::string prefix = std::string("# dyncav ") + kind + " v";
    if (line.rfind(prefix, 0) != 0)
        throw std::runtime_error("not a dyncav " + std::string(kind) + " file");
    const int ver = std::stoi(line.substr(prefix.size()));
    if (ver != kTimeseriesVersion)
        throw std::runtime_error("unsupported " + std::string(kind) + " format version " +
                                 std::to_string(ver));
    return ver;
}

inline std::vector<TimeseriesRow> read_timeseries_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty timeseries file");
    parse_version_line(line, "timeseries");
    if (!std::getline(in, line))
        throw std::runtime_error("timeseries file has no header row");

    std::vector<TimeseriesRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        TimeseriesRow row;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ','))
            vals.push_back(std::stod(cell));
        if (vals.size() < 4)
            throw std::runtime_error("short timeseries row");
        row.t = vals[0];
        row.n_total = vals[1];
        row.energy = vals[2];
        row.unitarity_defect = vals[3];
        row.n_modes.assign(vals.begin() + 4, vals.end());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<double> read_spectrum_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty spectrum file");
    parse_version_line(line, "spectrum");
    std::getline(in, line); // header
    std::vector<double> spectrum;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        spectrum.push_back(std::stod(line.substr(comma + 1)));
    }
    return spectrum;
}

// ---------------------------------------------------------------------------
// Named configurations for the reference scenarios
// ---------------------------------------------------------------------------

inline std::map<std::string, RunConfig> presets() {
    auto mk = [](int kind, double l0, double eps, double n, int k_max, double t_max, double dt,
                 Drive drive = Drive::standard) {
        RunConfig c;
        c.motion.kind = kind;
        c.motion.l0 = l0;
        c.motion.epsilon = eps;
        c.motion.resonance_index = n;
        c.motion.drive = drive;
        c.k_max = k_max;
        c.t_max = t_max;
        c.sample_interval = dt;
        return c;
    };
    std::map<std::string, RunConfig> p;
    p["fig2"] = mk(1, 0.1, 1e-5, 1.0, 15, 3500, 1.0);
    p["fig2_short"] = mk(1, 0.1, 1e-5, 1.0, 15, 250, 0.5);
    p["fig3_n1.5"] = mk(1, 0.1, 1e-5, 1.5, 20, 2000, 1.0);
    p["fig3_n2"] = mk(1, 0.1, 1e-5, 2.0, 25, 2000, 1.0);
    p["fig4"] = mk(1, 1.0, 1e-3, 1.0, 30, 500, 0.25);
    p["fig5"] = mk(1, 1.0, 1e-2, 1.0, 110, 100, 0.05);
    p["fig6"] = mk(1, 1.0, 1e-1, 1.0, 200, 12, 0.01);
    p["fig9"] = mk(2, 1.0, 1e-3, 1.0, 30, 500, 0.25);
    p["fig10"] = mk(2, 1.0, 1e-2, 1.0, 50, 100, 0.05);
    p["fig11"] = mk(2, 1.0, 1e-1, 1.0, 80, 12, 0.01);
    p["fig14"] = mk(2, 50.0, 2e-2, 1.0, 70, 1400, 1.0);
    p["fig15"] = mk(2, 50.0, 2e-2, 3.0, 80, 1400, 1.0);
    p["fig16"] = mk(2, 50.0, 2e-2, 1.0, 70, 4000, 1.0);
    p["fig17"] = mk(2, 1.0, 1e-3, 1.0, 30, 500, 0.25, Drive::true_resonance);
    p["fig18"] = mk(2, 1.0, 1e-2, 1.0, 110, 100, 0.05, Drive::true_resonance);
    p["fig19"] = mk(3, 1.0, 1e-3, 1.0, 50, 500, 0.25);
    return p;
}

} // namespace dyncav
