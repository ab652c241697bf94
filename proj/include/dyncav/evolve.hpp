// Adaptive integration of the truncated first-order mode system from the
// vacuum start xi = 2*I, eta = 0.
//
// The complex k_max x k_max matrices are carried as two real stacked
// matrices Zr, Zi of shape (2 k_max, k_max): the top block holds xi, the
// bottom block eta, one column per initial-excitation label m.  The velocity
// coupling of both blocks is a single constant stencil
//     W = [ S-  S+ ]
//         [ S+  S- ]
// so one RHS evaluation is two real GEMMs W*Zr, W*Zi plus diagonal work.
//
// Stepper: Dormand-Prince 5(4) with PI step-size control and the standard
// order-4 dense output, which decouples sampling from step selection.
// Columns evolve independently; work is partitioned into fixed-size column
// blocks processed by a pool.  The block layout depends only on k_max, never
// on the thread count, and the error norm is a max-reduction, so serial and
// parallel runs are bit-identical (shared-step mode, the default).

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cavity.hpp"
#include "coupling.hpp"
#include "detail/thread_pool.hpp"

namespace dyncav {

struct EvolutionState {
    double t = 0.0;
    MatrixXcd xi;
    MatrixXcd eta;
};

inline EvolutionState initial_state(const Truncation& trunc) {
    trunc.validate();
    EvolutionState s;
    s.t = 0.0;
    s.xi = 2.0 * MatrixXcd::Identity(trunc.k_max, trunc.k_max);
    s.eta = MatrixXcd::Zero(trunc.k_max, trunc.k_max);
    return s;
}

struct IntegratorConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double max_step = 0.0; // 0 = unrestricted
    double sample_interval = 0.1;
    int threads = 1;
    bool shared_steps = true; // false: each column runs its own step sequence

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw std::invalid_argument("IntegratorConfig: tolerances must be > 0");
        if (!(sample_interval > 0.0))
            throw std::invalid_argument("IntegratorConfig: sample_interval must be > 0");
        if (max_step < 0.0)
            throw std::invalid_argument("IntegratorConfig: max_step must be >= 0");
        if (threads < 1)
            throw std::invalid_argument("IntegratorConfig: threads must be >= 1");
    }
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double t_reached)
        : std::runtime_error(what), t_reached_(t_reached) {}
    double t_reached() const { return t_reached_; }

private:
    double t_reached_;
};

using SampleCallback = std::function<void(const EvolutionState&)>;

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // b - bhat
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    // dense-output weights
    static constexpr double d1 = -12715105075.0 / 11282082432.0;
    static constexpr double d3 = 87487479700.0 / 32700410799.0;
    static constexpr double d4 = -10690763975.0 / 1880347072.0;
    static constexpr double d5 = 701980252875.0 / 199316789632.0;
    static constexpr double d6 = -1453857185.0 / 822651844.0;
    static constexpr double d7 = 69997945.0 / 29380423.0;
};

// Pair of real matrices representing one complex matrix (2K x K each).
struct RIPair {
    MatrixXd r, i;

    void resize(Eigen::Index rows, Eigen::Index cols) {
        r.resize(rows, cols);
        i.resize(rows, cols);
    }
    void setZero(Eigen::Index rows, Eigen::Index cols) {
        r.setZero(rows, cols);
        i.setZero(rows, cols);
    }
};

// Diagonal coefficients of the system at one time.
struct DiagCoeffs {
    double gamma = 0.0;
    VectorXd ap, am;
};

inline DiagCoeffs diag_at(const CavityMotion& motion, int k_max, double t) {
    DiagCoeffs d;
    const TrajectorySample s = sample_trajectory(motion, t);
    d.gamma = s.gamma;
    diagonal_frequencies(motion, k_max, s.l, d.ap, d.am);
    return d;
}

class System {
public:
    System(const CavityMotion& motion, const Truncation& trunc)
        : motion_(motion), k_max_(trunc.k_max), W_(2 * trunc.k_max, 2 * trunc.k_max) {
        const CouplingStencils st(trunc);
        W_.topLeftCorner(k_max_, k_max_) = st.minus;
        W_.topRightCorner(k_max_, k_max_) = st.plus;
        W_.bottomLeftCorner(k_max_, k_max_) = st.plus;
        W_.bottomRightCorner(k_max_, k_max_) = st.minus;
    }

    int k_max() const { return k_max_; }
    const CavityMotion& motion() const { return motion_; }

    // dZ for columns [c0, c1).
    void rhs_block(const DiagCoeffs& d, const RIPair& Z, RIPair& dZ, int c0, int c1) const {
        const int K = k_max_;
        const int nc = c1 - c0;
        const auto zr = Z.r.middleCols(c0, nc);
        const auto zi = Z.i.middleCols(c0, nc);
        auto dr = dZ.r.middleCols(c0, nc);
        auto di = dZ.i.middleCols(c0, nc);

        dr.noalias() = -d.gamma * (W_ * zr);
        di.noalias() = -d.gamma * (W_ * zi);

        dr.topRows(K) += d.ap.asDiagonal() * zi.topRows(K) - d.am.asDiagonal() * zi.bottomRows(K);
        dr.bottomRows(K) +=
            d.am.asDiagonal() * zi.topRows(K) - d.ap.asDiagonal() * zi.bottomRows(K);
        di.topRows(K) -= d.ap.asDiagonal() * zr.topRows(K) - d.am.asDiagonal() * zr.bottomRows(K);
        di.bottomRows(K) -=
            d.am.asDiagonal() * zr.topRows(K) - d.ap.asDiagonal() * zr.bottomRows(K);
    }

private:
    CavityMotion motion_;
    int k_max_;
    MatrixXd W_;
};

inline void state_to_ri(const EvolutionState& s, RIPair& Z) {
    const auto K = s.xi.rows();
    Z.resize(2 * K, s.xi.cols());
    Z.r.topRows(K) = s.xi.real();
    Z.r.bottomRows(K) = s.eta.real();
    Z.i.topRows(K) = s.xi.imag();
    Z.i.bottomRows(K) = s.eta.imag();
}

inline EvolutionState ri_to_state(double t, const RIPair& Z) {
    const auto K = Z.r.rows() / 2;
    EvolutionState s;
    s.t = t;
    s.xi = Z.r.topRows(K).cast<cplx>() + cplx(0, 1) * Z.i.topRows(K).cast<cplx>();
    s.eta = Z.r.bottomRows(K).cast<cplx>() + cplx(0, 1) * Z.i.bottomRows(K).cast<cplx>();
    return s;
}

// Shared-step Dormand-Prince driver over the full column set.
class SharedStepper {
public:
    SharedStepper(const System& sys, const IntegratorConfig& cfg, const RIPair& z0, double t0)
        : sys_(sys), cfg_(cfg), pool_(cfg.threads), t_(t0), Z_(z0) {
        const int cols = static_cast<int>(Z_.r.cols());
        // Block layout fixed by the problem size so serial and parallel runs
        // execute identical GEMM calls.
        block_ = std::min(cols, 16);
        nblocks_ = (cols + block_ - 1) / block_;
        block_err_.assign(nblocks_, 0.0);
        for (auto& k : k_)
            k.setZero(Z_.r.rows(), cols);
        Ytmp_.setZero(Z_.r.rows(), cols);
        Znew_.setZero(Z_.r.rows(), cols);
        for (auto& rc : rcont_)
            rc.setZero(Z_.r.rows(), cols);
        diag_[0] = diag_at(sys_.motion(), sys_.k_max(), t_);
        parallel([&](int c0, int c1) { sys_.rhs_block(diag_[0], Z_, k_[0], c0, c1); });
    }

    double t() const { return t_; }
    const RIPair& state() const { return Z_; }

    // One accepted step; returns the step size actually taken.  On return
    // dense output for [t_prev, t] is available.
    double step(double h_suggest, double t_limit) {
        using T = Dopri5;
        double h = h_suggest;
        int nan_strikes = 0;
        for (;;) {
            h = std::min(h, t_limit - t_);
            if (!(h > 0.0) || h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t_), 1.0))
                throw IntegrationError("step size underflow", t_);

            stage_times(h);
            // stage 2..7 (k7 is the FSAL derivative at t+h)
            combine(h, {T::a21}, 1);
            eval(1);
            combine(h, {T::a31, T::a32}, 2);
            eval(2);
            combine(h, {T::a41, T::a42, T::a43}, 3);
            eval(3);
            combine(h, {T::a51, T::a52, T::a53, T::a54}, 4);
            eval(4);
            combine(h, {T::a61, T::a62, T::a63, T::a64, T::a65}, 5);
            eval(5);
            combine_solution(h);
            eval_final();

            const double err = error_norm(h);
            if (std::isnan(err)) {
                if (++nan_strikes > 10)
                    throw IntegrationError("non-finite state in integration", t_);
                h *= 0.1;
                rejected_ = true;
                continue;
            }
            if (err <= 1.0) {
                prepare_dense(h);
                t_prev_ = t_;
                t_ += h;
                std::swap(Z_, Znew_);
                std::swap(k_[0], k_[6]); // FSAL
                diag_[0] = diag_[7];
                h_taken_ = h;
                update_controller(err, h);
                rejected_ = false;
                ++n_accepted_;
                return h;
            }
            rejected_ = true;
            ++n_rejected_;
            const double fac11 = std::pow(err, expo1_);
            h /= std::min(1.0 / fac1_, fac11 / safe_);
        }
    }

    double propose_next() const { return h_next_; }

    void set_initial_step(double h) { h_next_ = h; }

    // Dense interpolation inside the last accepted step.
    void interpolate(double t, RIPair& out) const {
        const double th = (t - t_prev_) / h_taken_;
        const double th1 = 1.0 - th;
        auto eval_part = [&](auto get) {
            return get(rcont_[0]) +
                   th * (get(rcont_[1]) +
                         th1 * (get(rcont_[2]) + th * (get(rcont_[3]) + th1 * get(rcont_[4]))));
        };
        out.r = eval_part([](const RIPair& p) -> const MatrixXd& { return p.r; });
        out.i = eval_part([](const RIPair& p) -> const MatrixXd& { return p.i; });
    }

    long steps_accepted() const { return n_accepted_; }
    long steps_rejected() const { return n_rejected_; }

    // Starting step size following Hairer's hinit heuristic.
    double initial_step_guess(double t_limit) const {
        const double atol = cfg_.abs_tol, rtol = cfg_.rel_tol;
        double dnf = 0.0, dny = 0.0;
        const auto& y = Z_;
        const auto& f = k_[0];
        for (int part = 0; part < 2; ++part) {
            const MatrixXd& Y = part ? y.i : y.r;
            const MatrixXd& F = part ? f.i : f.r;
            for (Eigen::Index j = 0; j < Y.cols(); ++j)
                for (Eigen::Index i = 0; i < Y.rows(); ++i) {
                    const double sk = atol + rtol * std::abs(Y(i, j));
                    dnf += (F(i, j) / sk) * (F(i, j) / sk);
                    dny += (Y(i, j) / sk) * (Y(i, j) / sk);
                }
        }
        double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
        h = std::min(h, t_limit - t_);
        if (cfg_.max_step > 0.0)
            h = std::min(h, cfg_.max_step);
        return h;
    }

private:
    void parallel(const std::function<void(int, int)>& fn) {
        const int cols = static_cast<int>(Z_.r.cols());
        pool_.run(nblocks_, [&](int b) {
            const int c0 = b * block_;
            const int c1 = std::min(cols, c0 + block_);
            fn(c0, c1);
        });
    }

    void stage_times(double h) {
        using T = Dopri5;
        const double ts[8] = {t_,           t_ + T::c2 * h, t_ + T::c3 * h, t_ + T::c4 * h,
                              t_ + T::c5 * h, t_ + h,        t_ + h,         t_ + h};
        for (int i = 1; i < 8; ++i)
            diag_[i] = diag_at(sys_.motion(), sys_.k_max(), ts[i]);
    }

    // Ytmp = Z + h * sum_j a_j k_j  (j over the provided coefficients).
    void combine(double h, std::initializer_list<double> a, int /*stage*/) {
        parallel([&](int c0, int c1) {
            const int nc = c1 - c0;
            auto yr = Ytmp_.r.middleCols(c0, nc);
            auto yi = Ytmp_.i.middleCols(c0, nc);
            yr = Z_.r.middleCols(c0, nc);
            yi = Z_.i.middleCols(c0, nc);
            int j = 0;
            for (double aj : a) {
                yr += (h * aj) * k_[j].r.middleCols(c0, nc);
                yi += (h * aj) * k_[j].i.middleCols(c0, nc);
                ++j;
            }
        });
    }

    void eval(int stage) {
        parallel([&](int c0, int c1) { sys_.rhs_block(diag_[stage], Ytmp_, k_[stage], c0, c1); });
    }

    void combine_solution(double h) {
        using T = Dopri5;
        parallel([&](int c0, int c1) {
            const int nc = c1 - c0;
            auto yr = Znew_.r.middleCols(c0, nc);
            auto yi = Znew_.i.middleCols(c0, nc);
            yr = Z_.r.middleCols(c0, nc) + (h * T::b1) * k_[0].r.middleCols(c0, nc) +
                 (h * T::b3) * k_[2].r.middleCols(c0, nc) + (h * T::b4) * k_[3].r.middleCols(c0, nc) +
                 (h * T::b5) * k_[4].r.middleCols(c0, nc) + (h * T::b6) * k_[5].r.middleCols(c0, nc);
            yi = Z_.i.middleCols(c0, nc) + (h * T::b1) * k_[0].i.middleCols(c0, nc) +
                 (h * T::b3) * k_[2].i.middleCols(c0, nc) + (h * T::b4) * k_[3].i.middleCols(c0, nc) +
                 (h * T::b5) * k_[4].i.middleCols(c0, nc) + (h * T::b6) * k_[5].i.middleCols(c0, nc);
        });
    }

    void eval_final() {
        parallel([&](int c0, int c1) { sys_.rhs_block(diag_[6], Znew_, k_[6], c0, c1); });
    }

    double error_norm(double h) {
        using T = Dopri5;
        const double atol = cfg_.abs_tol, rtol = cfg_.rel_tol;
        parallel([&](int c0, int c1) {
            double emax = 0.0;
            for (int part = 0; part < 2; ++part) {
                auto pick = [&](const RIPair& p) -> const MatrixXd& { return part ? p.i : p.r; };
                const MatrixXd& y0 = pick(Z_);
                const MatrixXd& y1 = pick(Znew_);
                for (int j = c0; j < c1; ++j)
                    for (Eigen::Index i = 0; i < y0.rows(); ++i) {
                        const double e = h * (T::e1 * pick(k_[0])(i, j) + T::e3 * pick(k_[2])(i, j) +
                                              T::e4 * pick(k_[3])(i, j) + T::e5 * pick(k_[4])(i, j) +
                                              T::e6 * pick(k_[5])(i, j) + T::e7 * pick(k_[6])(i, j));
                        const double sk =
                            atol + rtol * std::max(std::abs(y0(i, j)), std::abs(y1(i, j)));
                        emax = std::max(emax, std::abs(e / sk));
                    }
            }
            block_err_[(c0 / block_)] = emax;
        });
        double err = 0.0;
        for (double e : block_err_)
            err = std::isnan(e) ? std::numeric_limits<double>::quiet_NaN() : std::max(err, e);
        return err;
    }

    void prepare_dense(double h) {
        using T = Dopri5;
        parallel([&](int c0, int c1) {
            const int nc = c1 - c0;
            for (int part = 0; part < 2; ++part) {
                auto pick = [&](RIPair& p) -> MatrixXd& { return part ? p.i : p.r; };
                auto pickc = [&](const RIPair& p) -> const MatrixXd& { return part ? p.i : p.r; };
                auto y0 = pickc(Z_).middleCols(c0, nc);
                auto y1 = pickc(Znew_).middleCols(c0, nc);
                auto r1 = pick(rcont_[0]).middleCols(c0, nc);
                auto r2 = pick(rcont_[1]).middleCols(c0, nc);
                auto r3 = pick(rcont_[2]).middleCols(c0, nc);
                auto r4 = pick(rcont_[3]).middleCols(c0, nc);
                auto r5 = pick(rcont_[4]).middleCols(c0, nc);
                r1 = y0;
                r2 = y1 - y0;
                r3 = h * pickc(k_[0]).middleCols(c0, nc) - r2;
                r4 = r2 - h * pickc(k_[6]).middleCols(c0, nc) - r3;
                r5 = h * (T::d1 * pickc(k_[0]).middleCols(c0, nc) +
                          T::d3 * pickc(k_[2]).middleCols(c0, nc) +
                          T::d4 * pickc(k_[3]).middleCols(c0, nc) +
                          T::d5 * pickc(k_[4]).middleCols(c0, nc) +
                          T::d6 * pickc(k_[5]).middleCols(c0, nc) +
                          T::d7 * pickc(k_[6]).middleCols(c0, nc));
            }
        });
    }

    void update_controller(double err, double h) {
        const double fac11 = std::pow(std::max(err, 1e-10), expo1_);
        double fac = fac11 / std::pow(facold_, beta_);
        fac = std::max(1.0 / fac2_, std::min(1.0 / fac1_, fac / safe_));
        double hnew = h / fac;
        if (rejected_)
            hnew = std::min(hnew, h); // no growth right after a rejection
        if (cfg_.max_step > 0.0)
            hnew = std::min(hnew, cfg_.max_step);
        h_next_ = hnew;
        facold_ = std::max(err, 1e-4);
    }

    const System& sys_;
    const IntegratorConfig& cfg_;
    dyncav::detail::ThreadPool pool_;

    double t_ = 0.0, t_prev_ = 0.0, h_taken_ = 0.0, h_next_ = 0.0;
    RIPair Z_, Znew_, Ytmp_;
    RIPair k_[7];
    RIPair rcont_[5];
    DiagCoeffs diag_[8];
    int block_ = 1, nblocks_ = 1;
    std::vector<double> block_err_;

    // PI controller constants (beta = 0.04).
    static constexpr double beta_ = 0.04;
    static constexpr double expo1_ = 0.2 - beta_ * 0.75;
    static constexpr double safe_ = 0.9;
    static constexpr double fac1_ = 0.2, fac2_ = 10.0;
    double facold_ = 1e-4;
    bool rejected_ = false;
    long n_accepted_ = 0, n_rejected_ = 0;
};

} // namespace detail

struct IntegrationStats {
    long steps_accepted = 0;
    long steps_rejected = 0;
};

// Advance the full system from t=0 to t_max, invoking on_sample at t=0 and at
// every multiple of sample_interval (via dense output) in time order.
inline EvolutionState integrate(const CavityMotion& motion, const Truncation& trunc,
                                const IntegratorConfig& cfg, double t_max,
                                const SampleCallback& on_sample = {},
                                IntegrationStats* stats = nullptr) {
    motion.validate();
    trunc.validate();
    cfg.validate();
    if (!(t_max > 0.0))
        throw std::invalid_argument("integrate: t_max must be > 0");

    const detail::System sys(motion, trunc);
    EvolutionState s0 = initial_state(trunc);
    detail::RIPair Z0;
    detail::state_to_ri(s0, Z0);

    detail::SharedStepper stepper(sys, cfg, Z0, 0.0);
    if (on_sample)
        on_sample(s0);

    double h = stepper.initial_step_guess(t_max);
    long next_sample = 1;
    const double dt = cfg.sample_interval;
    const double tol_t = 1e-9 * std::max(1.0, t_max);

    detail::RIPair interp;
    while (stepper.t() < t_max - tol_t) {
        stepper.step(h, t_max);
        h = stepper.propose_next();
        while (next_sample * dt <= stepper.t() + tol_t) {
            const double ts = next_sample * dt;
            if (on_sample) {
                stepper.interpolate(std::min(ts, stepper.t()), interp);
                on_sample(detail::ri_to_state(ts, interp));
            }
            ++next_sample;
        }
    }
    if (stats) {
        stats->steps_accepted = stepper.steps_accepted();
        stats->steps_rejected = stepper.steps_rejected();
    }
    return detail::ri_to_state(stepper.t(), stepper.state());
}

// Same contract as integrate().  With shared_steps (default) the column work
// of every step is partitioned over cfg.threads; results are bit-identical to
// the serial run by construction.  With shared_steps = false every column
// label m is integrated with its own adaptive step sequence; sampled states
// are buffered per column and the callbacks replayed in time order, which is
// again independent of the worker count.
inline EvolutionState evolve_columns_parallel(const CavityMotion& motion, const Truncation& trunc,
                                              const IntegratorConfig& cfg, double t_max,
                                              const SampleCallback& on_sample = {},
                                              IntegrationStats* stats = nullptr) {
    if (cfg.shared_steps)
        return integrate(motion, trunc, cfg, t_max, on_sample, stats);

    motion.validate();
    trunc.validate();
    cfg.validate();
    if (!(t_max > 0.0))
        throw std::invalid_argument("evolve_columns_parallel: t_max must be > 0");

    const int K = trunc.k_max;
    const long nsamples = static_cast<long>(std::floor(t_max / cfg.sample_interval + 1e-9)) + 1;

    // sampled[s] holds the full (xi, eta) pair at sample s, filled column by
    // column; final states are assembled the same way.
    std::vector<EvolutionState> sampled(on_sample ? nsamples : 1);
    for (auto& st : sampled) {
        st.xi.setZero(K, K);
        st.eta.setZero(K, K);
    }
    EvolutionState final_state;
    final_state.xi.setZero(K, K);
    final_state.eta.setZero(K, K);

    const detail::System sys(motion, trunc);
    IntegratorConfig col_cfg = cfg;
    col_cfg.threads = 1;
    std::vector<IntegrationStats> col_stats(K);

    dyncav::detail::ThreadPool pool(cfg.threads);
    std::vector<std::exception_ptr> errors(K);
    pool.run(K, [&](int m) {
        try {
            EvolutionState col0 = initial_state(trunc);
            detail::RIPair Zc;
            Zc.setZero(2 * K, 1);
            Zc.r(m, 0) = 2.0; // xi_m^(m) = 2

            detail::SharedStepper stepper(sys, col_cfg, Zc, 0.0);
            double h = stepper.initial_step_guess(t_max);
            const double tol_t = 1e-9 * std::max(1.0, t_max);
            long next = 1;
            if (on_sample) {
                sampled[0].xi.col(m) = col0.xi.col(m);
                sampled[0].eta.col(m) = col0.eta.col(m);
            }
            detail::RIPair interp;
            while (stepper.t() < t_max - tol_t) {
                stepper.step(h, t_max);
                h = stepper.propose_next();
                while (on_sample && next < nsamples &&
                       next * cfg.sample_interval <= stepper.t() + tol_t) {
                    stepper.interpolate(std::min(next * cfg.sample_interval, stepper.t()), interp);
                    sampled[next].t = next * cfg.sample_interval;
                    sampled[next].xi.col(m) =
                        interp.r.topRows(K).cast<cplx>() + cplx(0, 1) * interp.i.topRows(K).cast<cplx>();
                    sampled[next].eta.col(m) = interp.r.bottomRows(K).cast<cplx>() +
                                               cplx(0, 1) * interp.i.bottomRows(K).cast<cplx>();
                    ++next;
                }
            }
            final_state.t = stepper.t();
            final_state.xi.col(m) = stepper.state().r.topRows(K).cast<cplx>() +
                                    cplx(0, 1) * stepper.state().i.topRows(K).cast<cplx>();
            final_state.eta.col(m) = stepper.state().r.bottomRows(K).cast<cplx>() +
                                     cplx(0, 1) * stepper.state().i.bottomRows(K).cast<cplx>();
            col_stats[m].steps_accepted = stepper.steps_accepted();
            col_stats[m].steps_rejected = stepper.steps_rejected();
        } catch (...) {
            errors[m] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    if (on_sample)
        for (auto& st : sampled)
            on_sample(st);
    if (stats) {
        for (const auto& cs : col_stats) {
            stats->steps_accepted += cs.steps_accepted;
            stats->steps_rejected += cs.steps_rejected;
        }
    }
    return final_state;
}

} // namespace dyncav
