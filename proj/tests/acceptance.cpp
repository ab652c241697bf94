// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails.  Tolerances and run parameters are pinned here.
//
// Criterion 4 runs a desk-scale variant by default; set DYNCAV_ACCEPT_FULL=1
// for the full-size run (much slower, tighter bounds).

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <dyncav/dyncav.hpp>

using namespace dyncav;

namespace {

int failures = 0;
std::vector<const RunRecord*> audited; // every record feeds the defect audit

void report(int id, bool pass, const std::string& what, const std::string& detail) {
    std::printf("criterion %d %s  %s  (%s)\n", id, pass ? "PASS" : "FAIL", what.c_str(),
                detail.c_str());
    if (!pass)
        ++failures;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

RunConfig make_config(int kind, double l0, double eps, double n, int k_max, double t_max,
                      double dt, Drive drive = Drive::standard) {
    RunConfig c;
    c.motion.kind = kind;
    c.motion.l0 = l0;
    c.motion.epsilon = eps;
    c.motion.resonance_index = n;
    c.motion.drive = drive;
    c.k_max = k_max;
    c.t_max = t_max;
    c.sample_interval = dt;
    // tight enough that the unitarity drift over ~10^6 steps stays below the
    // structural bound checked in criterion 9
    c.rel_tol = 1e-10;
    c.abs_tol = 1e-13;
    c.observable_mode = ObservableMode::whole_period;
    return c;
}

// The small-cavity short-time runs take ~10^7 steps; they need an extra digit.
RunConfig tighten(RunConfig c) {
    c.rel_tol = 1e-11;
    c.abs_tol = 1e-14;
    return c;
}

RunRecord run_audited(const RunConfig& cfg) {
    RunRecord rec = run_simulation(cfg);
    std::printf("  [run] kind=%d l0=%g eps=%g n=%g k_max=%d t_max=%g: %ld steps, %.1f s\n",
                cfg.motion.kind, cfg.motion.l0, cfg.motion.epsilon, cfg.motion.resonance_index,
                cfg.k_max, cfg.t_max, rec.steps_accepted, rec.wall_seconds);
    std::fflush(stdout);
    return rec;
}

// RMS relative deviation of a series from a closed-form curve of slow time.
template <typename Ref>
double rms_dev(const RunRecord& rec, const Series& s, const Ref& ref, double tau_lo,
               double tau_hi) {
    double ss = 0.0;
    long n = 0;
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        const double tau = slow_time(rec.config.motion, s.t[i]);
        if (tau < tau_lo || tau > tau_hi)
            continue;
        const double r = ref(tau);
        if (r <= 0.0)
            continue;
        const double d = (s.y[i] - r) / r;
        ss += d * d;
        ++n;
    }
    return n > 0 ? std::sqrt(ss / n) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

int main() {
    const bool full = [] {
        const char* s = std::getenv("DYNCAV_ACCEPT_FULL");
        return s && std::string(s) != "0";
    }();

    // ---- criterion 1: short-time resonance value -------------------------
    const RunRecord rec1 = run_audited(tighten(make_config(1, 0.1, 1e-5, 1.0, 15, 250.0, 25.0)));
    audited.push_back(&rec1);
    {
        const double n1 = rec1.final_spectrum[0];
        const double expect = 1.542e-3;
        const double dev = std::abs(n1 - expect) / expect;
        report(1, dev < 0.01, "short-time resonance value",
               "N_1=" + num(n1) + " expected " + num(expect) + " dev=" + num(dev));
    }

    // ---- criterion 2: short-time spectrum at fractional drive index ------
    const RunRecord rec2a = run_audited(tighten(make_config(1, 0.1, 1e-5, 1.5, 15, 250.0, 25.0)));
    const RunRecord rec2b = run_audited(tighten(make_config(1, 0.1, 1e-5, 2.0, 15, 250.0, 25.0)));
    audited.push_back(&rec2a);
    audited.push_back(&rec2b);
    {
        const double expect = 3.084e-3; // 2 tau^2 at tau = eps Omega_1 t / 2
        const double n1 = rec2a.final_spectrum[0], n2 = rec2a.final_spectrum[1];
        const bool half_ok = std::abs(n1 - expect) / expect < 0.01 &&
                             std::abs(n2 - expect) / expect < 0.01 &&
                             std::abs(n1 - n2) / n1 < 0.01;

        const double m1 = rec2b.final_spectrum[0], m2 = rec2b.final_spectrum[1];
        const double m3 = rec2b.final_spectrum[2];
        const double ratio = m2 / m1;
        const bool int_ok = std::abs(ratio - 4.0 / 3.0) / (4.0 / 3.0) < 0.03 &&
                            rec2b.final_spectrum[3] < 0.01 * m2;
        report(2, half_ok && int_ok, "short-time spectrum shape",
               "n=1.5: N_1=" + num(n1) + " N_2=" + num(n2) + "; n=2: N_2/N_1=" + num(ratio) +
                   " N_3=" + num(m3) + " N_4=" + num(rec2b.final_spectrum[3]));
    }

    // ---- criterion 3: elliptic-law tracking ------------------------------
    const RunRecord rec3 = run_audited(make_config(1, 1.0, 1e-3, 1.0, 30, 500.0, 1.0));
    audited.push_back(&rec3);
    {
        const double devN = rms_dev(rec3, series_total(rec3),
                                    [](double tau) { return dodonov_N(tau); }, 0.1, 0.78);
        const double devN1 = rms_dev(rec3, series_mode(rec3, 1),
                                     [](double tau) { return dodonov_N1(tau); }, 0.1, 0.78);
        report(3, devN < 0.03 && devN1 < 0.03, "elliptic-law tracking",
               "rms N=" + num(devN) + " rms N_1=" + num(devN1));
    }

    // ---- criterion 4: asymptotic creation rates --------------------------
    const int c4_kmax = full ? 110 : 60;
    const double c4_tmax = full ? 100.0 : 80.0;
    const RunRecord rec4 = run_audited(make_config(1, 1.0, 1e-2, 1.0, c4_kmax, c4_tmax, 1.0));
    audited.push_back(&rec4);
    {
        const double a3_lo = full ? 0.0040 : 0.0036, a3_hi = full ? 0.0044 : 0.00484;
        const double a5_lo = full ? 0.0024 : 0.00216, a5_hi = full ? 0.0027 : 0.00297;
        // tau > 1 means t > 2 / (eps pi) = 63.66
        const TimeWindow window{2.0 / (1e-2 * pi), c4_tmax};
        const double a3 = linear_fit(series_mode(rec4, 3), window).a;
        const double a5 = linear_fit(series_mode(rec4, 5), window).a;
        report(4, a3 > a3_lo && a3 < a3_hi && a5 > a5_lo && a5 < a5_hi,
               full ? "asymptotic rates (full)" : "asymptotic rates (desk scale)",
               "a_3=" + num(a3) + " in [" + num(a3_lo) + "," + num(a3_hi) + "], a_5=" + num(a5) +
                   " in [" + num(a5_lo) + "," + num(a5_hi) + "]");
    }

    // ---- criterion 5: energy law -----------------------------------------
    const RunRecord rec5b = run_audited(make_config(2, 1.0, 1e-3, 1.0, 30, 150.0, 1.0));
    audited.push_back(&rec5b);
    {
        const double devE = rms_dev(rec3, series_energy(rec3),
                                    [](double tau) { return dodonov_energy(tau, pi); }, 0.1, 0.78);
        const auto fit = power_law_fit(series_energy(rec5b), {20.0, 150.0});
        report(5, devE < 0.05 && std::abs(fit.alpha - 2.0) < 0.1, "energy growth law",
               "rms E=" + num(devE) + " alpha=" + num(fit.alpha));
    }

    // ---- criterion 6: smooth-start linear regime -------------------------
    const RunRecord rec6 = run_audited(make_config(2, 50.0, 2e-2, 1.0, 70, 1600.0, 50.0));
    audited.push_back(&rec6);
    {
        // tau in [1/2, 1] maps to t in [795.8, 1591.5]
        const TimeWindow window = linear_regime_window(2e-2, 50.0);
        const double a = linear_fit(series_total(rec6), window).a;
        const double expect = 2e-2 / 50.0;
        const double dev = std::abs(a - expect) / expect;
        report(6, dev < 0.10, "linear growth regime",
               "slope=" + num(a) + " expected " + num(expect) + " dev=" + num(dev));
    }

    // ---- criterion 7: retuned drive vs standard drive --------------------
    const RunRecord rec7a = run_audited(
        make_config(2, 1.0, 1e-2, 1.0, 40, 64 * 1.01, 1.01, Drive::true_resonance));
    const RunRecord rec7b = run_audited(make_config(2, 1.0, 1e-2, 1.0, 40, 96.0, 1.0));
    audited.push_back(&rec7a);
    audited.push_back(&rec7b);
    {
        const double dev_tr = rms_dev(rec7a, series_total(rec7a),
                                      [](double tau) { return dodonov_N(tau); }, 0.1, 1.0);
        const auto std_series = series_total(rec7b);
        const double tau_end = slow_time(rec7b.config.motion, std_series.t.back());
        const double dep = std::abs(std_series.y.back() - dodonov_N(tau_end)) / dodonov_N(tau_end);
        report(7, dev_tr < 0.10 && dep > 0.25, "retuned drive restores the resonance laws",
               "rms retuned=" + num(dev_tr) + ", standard departs by " + num(dep) + " at tau=" +
                   num(tau_end));
    }

    // ---- criterion 8: selection rule -------------------------------------
    {
        double even_max = 0.0, odd_max = 0.0;
        for (std::size_t k = 1; k <= rec3.final_spectrum.size(); ++k)
            (k % 2 == 0 ? even_max : odd_max) =
                std::max(k % 2 == 0 ? even_max : odd_max, rec3.final_spectrum[k - 1]);
        const bool n1_ok = even_max < 1e-6 * odd_max;

        double sup_max = 0.0, all_max = 0.0;
        for (std::size_t k = 1; k <= rec2b.final_spectrum.size(); ++k) {
            all_max = std::max(all_max, rec2b.final_spectrum[k - 1]);
            if (k % 4 == 0)
                sup_max = std::max(sup_max, rec2b.final_spectrum[k - 1]);
        }
        const bool n2_ok = sup_max < 1e-6 * all_max;
        report(8, n1_ok && n2_ok, "mode selection rule",
               "n=1: even/odd=" + num(even_max / odd_max) + "; n=2: suppressed/max=" +
                   num(sup_max / all_max));
    }

    // ---- criterion 9: structural properties ------------------------------
    {
        std::string detail;
        bool ok = true;

        // unitarity on every run above
        double worst_defect = 0.0;
        for (const RunRecord* r : audited)
            worst_defect = std::max(worst_defect, max_unitarity_defect(*r));
        ok = ok && worst_defect < 1e-6;
        detail += "defect=" + num(worst_defect);

        // static cavity stays in vacuum
        const RunRecord rec_static = run_simulation(make_config(1, 1.0, 0.0, 1.0, 10, 5.0, 0.5));
        double static_max = 0.0;
        for (const auto& row : rec_static.rows)
            static_max = std::max(static_max, row.n_total);
        ok = ok && static_max < 1e-10;
        detail += " static=" + num(static_max);

        // first/second-order equivalence over five periods
        double equiv_worst = 0.0;
        for (int kind : {1, 2}) {
            CavityMotion m;
            m.kind = kind;
            m.epsilon = 0.01;
            IntegratorConfig ic;
            ic.rel_tol = 1e-10;
            ic.abs_tol = 1e-13;
            ic.sample_interval = 5.0 * m.period();
            const double t_cmp = 5.0 * m.period();
            const auto direct = integrate(m, Truncation{5}, ic, t_cmp);
            const auto ref = second_order_reference(m, Truncation{5}, ic, t_cmp);
            equiv_worst = std::max(
                equiv_worst, std::max((direct.xi - ref.xi.back()).cwiseAbs().maxCoeff(),
                                      (direct.eta - ref.eta.back()).cwiseAbs().maxCoeff()));
        }
        ok = ok && equiv_worst < 1e-6;
        detail += " equiv=" + num(equiv_worst);

        // serial/parallel bit identity (shared-step mode)
        {
            CavityMotion m;
            m.kind = 1;
            m.epsilon = 0.02;
            IntegratorConfig serial, threaded;
            threaded.threads = 3;
            const auto a = evolve_columns_parallel(m, Truncation{20}, serial, 3.0);
            const auto b = evolve_columns_parallel(m, Truncation{20}, threaded, 3.0);
            const double diff = std::max((a.xi - b.xi).cwiseAbs().maxCoeff(),
                                         (a.eta - b.eta).cwiseAbs().maxCoeff());
            ok = ok && diff == 0.0;
            detail += " bitident=" + num(diff);
        }

        // cut-off stability on two reference configurations
        {
            const RunRecord small1 = run_audited(tighten(make_config(1, 0.1, 1e-5, 1.0, 10, 250.0, 25.0)));
            const auto repA = convergence_compare(small1.final_spectrum, rec1.final_spectrum, 1e-6);
            const RunRecord small6 = run_audited(make_config(2, 50.0, 2e-2, 1.0, 60, 1600.0, 50.0));
            // modes below 1e-4 of the peak are truncation fringe; the
            // resolved part of the spectrum must be stable to 10%
            const auto repB = convergence_compare(small6.final_spectrum, rec6.final_spectrum, 1e-4);
            ok = ok && repA.max_rel_deviation < 0.01 && repB.max_rel_deviation < 0.10;
            detail += " cutoffA=" + num(repA.max_rel_deviation) +
                      " cutoffB=" + num(repB.max_rel_deviation);
        }

        report(9, ok, "structural properties", detail);
    }

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
