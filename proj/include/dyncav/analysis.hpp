// Data-reduction helpers: least-squares fits of sampled series and the
// cut-off convergence comparison used to certify truncation stability.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyncav {

struct TimeWindow {
    double t_lo = 0.0;
    double t_hi = 0.0;
    bool contains(double t) const { return t >= t_lo && t <= t_hi; }
};

enum class FitModel { linear, power_law };

struct FitResult {
    FitModel model = FitModel::linear;
    // linear: y = a t + b; power law: y = beta t^alpha
    double a = 0.0, b = 0.0;
    double alpha = 0.0, beta = 0.0;
    TimeWindow fit_window;
    double residual_rms = 0.0;
    std::size_t n_points = 0;
};

struct Series {
    std::vector<double> t;
    std::vector<double> y;
};

namespace detail {

inline void least_squares_line(const std::vector<double>& x, const std::vector<double>& y,
                               double& slope, double& intercept, double& rms) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0)
        throw std::invalid_argument("fit: degenerate window (all abscissae equal)");
    slope = (n * sxy - sx * sy) / denom;
    intercept = (sy - slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (slope * x[i] + intercept);
        ss += r * r;
    }
    rms = std::sqrt(ss / n);
}

} // namespace detail

// Least-squares N(t) = a t + b over the window.
inline FitResult linear_fit(const Series& series, const TimeWindow& window) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < series.t.size(); ++i)
        if (window.contains(series.t[i])) {
            xs.push_back(series.t[i]);
            ys.push_back(series.y[i]);
        }
    if (xs.size() < 3)
        throw std::invalid_argument("linear_fit: need at least 3 samples in window");
    FitResult r;
    r.model = FitModel::linear;
    r.fit_window = window;
    r.n_points = xs.size();
    detail::least_squares_line(xs, ys, r.a, r.b, r.residual_rms);
    return r;
}

// Unweighted log-log regression for y = beta t^alpha.  Residual RMS is in
// log space.
inline FitResult power_law_fit(const Series& series, const TimeWindow& window) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < series.t.size(); ++i)
        if (window.contains(series.t[i])) {
            if (!(series.t[i] > 0.0) || !(series.y[i] > 0.0))
                throw std::invalid_argument("power_law_fit: non-positive sample in window");
            xs.push_back(std::log(series.t[i]));
            ys.push_back(std::log(series.y[i]));
        }
    if (xs.size() < 3)
        throw std::invalid_argument("power_law_fit: need at least 3 samples in window");
    FitResult r;
    r.model = FitModel::power_law;
    r.fit_window = window;
    r.n_points = xs.size();
    double intercept;
    detail::least_squares_line(xs, ys, r.alpha, intercept, r.residual_rms);
    r.beta = std::exp(intercept);
    return r;
}

// The empirically linear regime of the raised-cosine motion, in slow time.
inline TimeWindow linear_regime_window(double epsilon, double l0) {
    // tau = (pi/2) (eps/l0) t, so tau in [1/2, 1] maps to:
    const double t_unit = 2.0 * l0 / (3.14159265358979323846 * epsilon);
    return {0.5 * t_unit, 1.0 * t_unit};
}

struct ConvergenceReport {
    int common_modes = 0;              // modes compared (min of the two cut-offs)
    std::vector<double> rel_deviation; // per common mode
    double max_rel_deviation = 0.0;
    int worst_mode = 0; // 1-based, 0 if empty
};

// Compare two final spectra from runs differing only in cut-off.  Relative
// deviation is measured against the larger of the two mode populations;
// modes whose population is below floor_fraction * max(N) in both runs are
// reported as zero deviation (they carry no signal).
inline ConvergenceReport convergence_compare(const std::vector<double>& spectrumA,
                                             const std::vector<double>& spectrumB,
                                             double floor_fraction = 1e-9) {
    ConvergenceReport rep;
    rep.common_modes = static_cast<int>(std::min(spectrumA.size(), spectrumB.size()));
    double nmax = 0.0;
    for (int k = 0; k < rep.common_modes; ++k)
        nmax = std::max({nmax, spectrumA[k], spectrumB[k]});
    const double floor = floor_fraction * nmax;
    for (int k = 0; k < rep.common_modes; ++k) {
        const double a = spectrumA[k], b = spectrumB[k];
        const double ref = std::max(a, b);
        const double dev = (ref > floor && ref > 0.0) ? std::abs(a - b) / ref : 0.0;
        rep.rel_deviation.push_back(dev);
        if (dev > rep.max_rel_deviation) {
            rep.max_rel_deviation = dev;
            rep.worst_mode = k + 1;
        }
    }
    return rep;
}

} // namespace dyncav
