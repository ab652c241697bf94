// Independent ground truths: complete elliptic integrals by AGM iteration,
// the closed-form particle-number predictions for the resonantly driven
// cavity, and a direct integrator for the second-order mode equations that
// the first-order evolution can be checked against.
//
// Elliptic integral convention: the argument is the modulus kappa, not the
// parameter m = kappa^2.  The resonance formulas take the slow time
// tau = eps * Omega_1^0 * t / 2 and kappa = sqrt(1 - exp(-8 tau)).

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cavity.hpp"
#include "coupling.hpp"
#include "evolve.hpp"

namespace dyncav {

// Complete elliptic integral of the first kind, K(kappa), by the
// arithmetic-geometric mean.
inline double elliptic_K(double kappa) {
    if (!(kappa >= 0.0 && kappa < 1.0))
        throw std::domain_error("elliptic_K: modulus must be in [0, 1)");
    double a = 1.0, b = std::sqrt(1.0 - kappa * kappa);
    while (std::abs(a - b) > 1e-15 * a) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return pi / (2.0 * a);
}

// Complete elliptic integral of the second kind, E(kappa).
inline double elliptic_E(double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0))
        throw std::domain_error("elliptic_E: modulus must be in [0, 1]");
    if (kappa == 1.0)
        return 1.0;
    double a = 1.0, b = std::sqrt(1.0 - kappa * kappa), c = kappa;
    double sum = 0.5 * c * c;
    double pow2 = 0.5; // 2^(n-1)
    while (std::abs(a - b) > 1e-15 * a) {
        const double an = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = std::sqrt(a * b);
        a = an;
        pow2 *= 2.0;
        sum += pow2 * c * c;
    }
    return (pi / (2.0 * a)) * (1.0 - sum);
}

inline double resonance_modulus(double tau) { return std::sqrt(1.0 - std::exp(-8.0 * tau)); }

// Resonance-mode particle number for the main resonance, valid for eps << 1:
// N_1 = (2/pi^2) E(kappa) K(kappa) - 1/2.
inline double dodonov_N1(double tau) {
    if (tau < 0.0)
        throw std::domain_error("dodonov_N1: tau must be >= 0");
    if (tau == 0.0)
        return 0.0;
    const double k = resonance_modulus(tau);
    return (2.0 / (pi * pi)) * elliptic_E(k) * elliptic_K(k) - 0.5;
}

// Total particle number for the main resonance:
// N = (1/pi^2) [ (1 - kappa^2/2) K^2 - E K ].
inline double dodonov_N(double tau) {
    if (tau < 0.0)
        throw std::domain_error("dodonov_N: tau must be >= 0");
    if (tau == 0.0)
        return 0.0;
    const double k = resonance_modulus(tau);
    const double K = elliptic_K(k), E = elliptic_E(k);
    return ((1.0 - 0.5 * k * k) * K * K - E * K) / (pi * pi);
}

// Short-time spectrum for drive index n: N_k = (2n - k) k tau^2 for k < 2n,
// zero otherwise.
inline double ji_short_time(int k, double n, double tau) {
    if (k < 1)
        throw std::domain_error("ji_short_time: mode index must be >= 1");
    if (k >= 2.0 * n)
        return 0.0;
    return (2.0 * n - k) * k * tau * tau;
}

// Late-time creation rate dN_k/dt = 4 eps / (pi k), stated for odd modes.
inline double dodonov_rate(int k, double epsilon) {
    if (k < 1 || k % 2 == 0)
        throw std::domain_error("dodonov_rate: mode index must be odd and >= 1");
    return 4.0 * epsilon / (pi * k);
}

// Radiated energy E(tau) = (Omega_1^0 / 4) sinh^2(2 tau).
inline double dodonov_energy(double tau, double omega1_0) {
    if (tau < 0.0)
        throw std::domain_error("dodonov_energy: tau must be >= 0");
    const double s = std::sinh(2.0 * tau);
    return 0.25 * omega1_0 * s * s;
}

// ---------------------------------------------------------------------------
// Direct integration of the second-order mode equations
//
//   eps_n'' + Omega_n^2(t) eps_n + 2 sum_m M_mn eps_m'
//           + sum_m (Mdot_mn - N_nm) eps_m = 0
//
// with M = gamma Mhat (antisymmetric stencil) and the truncated
// N = -gamma^2 Mhat^2.  Initial data eps = I, eps' = -i diag(Omega^0) + M(0).
// The result is converted to (xi, eta) through
//   xi  = eps + i diag(1/Omega^0) (eps' - gamma Mhat eps)
//   eta = eps - i diag(1/Omega^0) (eps' - gamma Mhat eps).
// Deliberately plain: one column at a time, no dense output, steps forced
// onto the sample grid.  It exists for correctness checks at small k_max.
// ---------------------------------------------------------------------------

struct SecondOrderSeries {
    std::vector<double> t;
    std::vector<MatrixXcd> xi;
    std::vector<MatrixXcd> eta;
};

namespace detail {

// Minimal embedded Dormand-Prince step for a complex vector ODE.
template <typename Rhs>
inline bool rk45_try_step(const Rhs& f, double t, const VectorXcd& y, const VectorXcd& k1, double h,
                          VectorXcd& y_out, VectorXcd& k_out, double& err, double atol,
                          double rtol) {
    using T = Dopri5;
    const VectorXcd k2 = f(t + T::c2 * h, y + h * (T::a21 * k1));
    const VectorXcd k3 = f(t + T::c3 * h, y + h * (T::a31 * k1 + T::a32 * k2));
    const VectorXcd k4 = f(t + T::c4 * h, y + h * (T::a41 * k1 + T::a42 * k2 + T::a43 * k3));
    const VectorXcd k5 =
        f(t + T::c5 * h, y + h * (T::a51 * k1 + T::a52 * k2 + T::a53 * k3 + T::a54 * k4));
    const VectorXcd k6 = f(
        t + h, y + h * (T::a61 * k1 + T::a62 * k2 + T::a63 * k3 + T::a64 * k4 + T::a65 * k5));
    y_out = y + h * (T::b1 * k1 + T::b3 * k3 + T::b4 * k4 + T::b5 * k5 + T::b6 * k6);
    k_out = f(t + h, y_out);
    const VectorXcd e = h * (T::e1 * k1 + T::e3 * k3 + T::e4 * k4 + T::e5 * k5 + T::e6 * k6 +
                             T::e7 * k_out);
    err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sk = atol + rtol * std::max(std::abs(y[i]), std::abs(y_out[i]));
        err = std::max(err, std::abs(e[i]) / sk);
    }
    return err <= 1.0;
}

template <typename Rhs>
inline VectorXcd rk45_integrate_to(const Rhs& f, double t0, double t1, VectorXcd y, double atol,
                                   double rtol) {
    double t = t0;
    VectorXcd k1 = f(t, y);
    double h = std::min(1e-3, (t1 - t0) * 0.1);
    VectorXcd y_new, k_new;
    while (t < t1 - 1e-12 * std::max(1.0, t1)) {
        h = std::min(h, t1 - t);
        if (h < 1e2 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0))
            throw IntegrationError("second-order reference: step size underflow", t);
        double err;
        if (rk45_try_step(f, t, y, k1, h, y_new, k_new, err, atol, rtol)) {
            t += h;
            y.swap(y_new);
            k1.swap(k_new);
            h *= std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2));
        } else {
            h *= std::max(0.1, 0.9 * std::pow(err, -0.2));
        }
    }
    return y;
}

} // namespace detail

inline SecondOrderSeries second_order_reference(const CavityMotion& motion, const Truncation& trunc,
                                                const IntegratorConfig& integ, double t_max) {
    motion.validate();
    trunc.validate();
    integ.validate();
    const int K = trunc.k_max;
    const CouplingStencils st(trunc);
    const MatrixXcd Mhat = st.m_hat.cast<cplx>();
    const MatrixXcd Mhat2 = (st.m_hat * st.m_hat).cast<cplx>();
    VectorXd omega0(K);
    for (int n = 1; n <= K; ++n)
        omega0[n - 1] = n * pi / motion.l0;

    // y = [eps; eps_dot] per column.
    auto rhs = [&](double t, const VectorXcd& y) -> VectorXcd {
        const TrajectorySample s = sample_trajectory(motion, t);
        VectorXcd out(2 * K);
        const auto e = y.head(K);
        const auto ed = y.tail(K);
        VectorXd om2(K);
        for (int n = 1; n <= K; ++n) {
            const double w = n * pi / s.l;
            om2[n - 1] = w * w;
        }
        out.head(K) = ed;
        out.tail(K) = -om2.cast<cplx>().cwiseProduct(e) + 2.0 * s.gamma * (Mhat * ed) +
                      s.gamma_dot * (Mhat * e) - (s.gamma * s.gamma) * (Mhat2 * e);
        return out;
    };

    SecondOrderSeries series;
    const long nsamples = static_cast<long>(std::floor(t_max / integ.sample_interval + 1e-9)) + 1;
    for (long i = 0; i < nsamples; ++i)
        series.t.push_back(i * integ.sample_interval);
    if (series.t.back() < t_max - 1e-9 * std::max(1.0, t_max))
        series.t.push_back(t_max);
    series.xi.assign(series.t.size(), MatrixXcd::Zero(K, K));
    series.eta.assign(series.t.size(), MatrixXcd::Zero(K, K));

    const double gamma0 = sample_trajectory(motion, 0.0).gamma;
    for (int m = 0; m < K; ++m) {
        VectorXcd y = VectorXcd::Zero(2 * K);
        y[m] = 1.0;                                   // eps = delta_nm
        y.tail(K) = gamma0 * Mhat.col(m);             // eps_dot = -i Omega delta + M(0) column
        y[K + m] += cplx(0.0, -omega0[m]);

        double t_prev = 0.0;
        for (std::size_t i = 0; i < series.t.size(); ++i) {
            const double ts = series.t[i];
            if (ts > t_prev)
                y = detail::rk45_integrate_to(rhs, t_prev, ts, y, integ.abs_tol, integ.rel_tol);
            t_prev = ts;

            const TrajectorySample s = sample_trajectory(motion, ts);
            const VectorXcd e = y.head(K);
            const VectorXcd q = y.tail(K) - s.gamma * (Mhat * e); // eps_dot + M^T eps
            for (int n = 0; n < K; ++n) {
                const cplx corr = cplx(0.0, 1.0) / omega0[n] * q[n];
                series.xi[i](n, m) = e[n] + corr;
                series.eta[i](n, m) = e[n] - corr;
            }
        }
    }
    return series;
}

} // namespace dyncav
