#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hota/errors.hpp"

namespace hota {

/// Natural cubic smoothing spline: the minimizer of
///   sum_i (y_i - f(x_i))^2 + lambda * integral f''(x)^2 dx,
/// computed in Reinsch form. lambda = 0 gives the interpolating natural
/// spline. Outside the knot range the spline continues linearly.
class SmoothingSpline {
  public:
    struct Options {
        /// Choose lambda by generalized cross-validation.
        bool gcv = true;
        /// Fixed lambda when gcv is false. The scale-free parameter
        /// rho = lambda * tr(Q'Q) / tr(R) is what GCV searches over.
        double lambda = 0.0;
        double log10_rho_min = -14.0;
        double log10_rho_max = 2.0;
        /// Applied to the chosen lambda; > 1 forces extra smoothing.
        double lambda_multiplier = 1.0;
    };

    SmoothingSpline() = default;

    SmoothingSpline(std::vector<double> x, std::vector<double> y, const Options& opt) { fit(std::move(x), std::move(y), opt); }

    static SmoothingSpline interpolate(std::vector<double> x, std::vector<double> y) {
        Options o;
        o.gcv = false;
        o.lambda = 0.0;
        return SmoothingSpline(std::move(x), std::move(y), o);
    }

    double operator()(double t) const { return eval<0>(t); }
    double derivative(double t) const { return eval<1>(t); }
    double second_derivative(double t) const { return eval<2>(t); }

    const std::vector<double>& knots() const { return x_; }
    const std::vector<double>& fitted() const { return f_; }
    double lambda() const { return lambda_; }
    double gcv_score() const { return gcv_; }
    bool empty() const { return x_.empty(); }
    double max_residual() const { return max_residual_; }

  private:
    std::vector<double> x_, f_, m_;
    double lambda_ = 0.0;
    double gcv_ = std::numeric_limits<double>::quiet_NaN();
    double max_residual_ = 0.0;

    void fit(std::vector<double> x, std::vector<double> y, const Options& opt) {
        const auto n = x.size();
        if (n != y.size()) throw ValidationError("spline: x and y sizes differ");
        if (n < 2) throw ValidationError("spline: need at least two knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x[i] > x[i - 1])) throw ValidationError("spline: knots must be strictly increasing");
        for (double v : y)
            if (!std::isfinite(v)) throw NumericalError("spline: non-finite value");
        x_ = std::move(x);
        m_.assign(n, 0.0);
        if (n == 2) {
            f_ = y;
            return;
        }
        // Q is n x k tridiagonal by columns, R and P = Q'Q are banded; every
        // quantity below is O(n) per lambda.
        const std::size_t k = n - 2;
        std::vector<double> qa(k), qb(k), qc(k), r0(k), r1(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            const double h0 = x_[j + 1] - x_[j], h1 = x_[j + 2] - x_[j + 1];
            qa[j] = 1.0 / h0;
            qb[j] = -1.0 / h0 - 1.0 / h1;
            qc[j] = 1.0 / h1;
            r0[j] = (h0 + h1) / 3.0;
            if (j + 1 < k) r1[j] = h1 / 6.0;
        }
        std::vector<double> p0(k), p1(k, 0.0), p2(k, 0.0), qty(k);
        double tr_r = 0.0, tr_p = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p0[j] = qa[j] * qa[j] + qb[j] * qb[j] + qc[j] * qc[j];
            if (j + 1 < k) p1[j] = qb[j] * qa[j + 1] + qc[j] * qb[j + 1];
            if (j + 2 < k) p2[j] = qc[j] * qa[j + 2];
            qty[j] = qa[j] * y[j] + qb[j] * y[j + 1] + qc[j] * y[j + 2];
            tr_r += r0[j];
            tr_p += p0[j];
        }
        const double scale = tr_r / tr_p;

        // Banded LDL' of M = R + lambda P; gamma = M^{-1} Q'y.
        std::vector<double> D(k), l1(k, 0.0), l2(k, 0.0), gamma(k);
        auto factor = [&](double lam) {
            for (std::size_t i = 0; i < k; ++i) {
                double d = r0[i] + lam * p0[i];
                if (i >= 1) d -= l1[i - 1] * l1[i - 1] * D[i - 1];
                if (i >= 2) d -= l2[i - 2] * l2[i - 2] * D[i - 2];
                if (!(d > 0.0)) throw NumericalError("spline: banded system is not positive definite");
                D[i] = d;
                double m1 = r1[i] + lam * p1[i];
                if (i >= 1) m1 -= l2[i - 1] * l1[i - 1] * D[i - 1];
                l1[i] = i + 1 < k ? m1 / d : 0.0;
                l2[i] = i + 2 < k ? lam * p2[i] / d : 0.0;
            }
            for (std::size_t i = 0; i < k; ++i) {
                double z = qty[i];
                if (i >= 1) z -= l1[i - 1] * gamma[i - 1];
                if (i >= 2) z -= l2[i - 2] * gamma[i - 2];
                gamma[i] = z;
            }
            for (std::size_t i = 0; i < k; ++i) gamma[i] /= D[i];
            for (std::size_t i = k; i-- > 0;) {
                if (i + 1 < k) gamma[i] -= l1[i] * gamma[i + 1];
                if (i + 2 < k) gamma[i] -= l2[i] * gamma[i + 2];
            }
        };
        // Residual y - f = lambda Q gamma.
        auto residual = [&](double lam) {
            std::vector<double> res(n, 0.0);
            for (std::size_t j = 0; j < k; ++j) {
                res[j] += lam * qa[j] * gamma[j];
                res[j + 1] += lam * qb[j] * gamma[j];
                res[j + 2] += lam * qc[j] * gamma[j];
            }
            return res;
        };
        // tr(M^{-1} P) from the band of M^{-1} (Hutchinson and de Hoog).
        std::vector<double> s0(k), s1(k, 0.0), s2(k, 0.0);
        auto trace_minv_p = [&]() {
            for (std::size_t i = k; i-- > 0;) {
                const double a1 = i + 1 < k ? l1[i] : 0.0, a2 = i + 2 < k ? l2[i] : 0.0;
                const double s11 = i + 1 < k ? s0[i + 1] : 0.0, s12 = i + 2 < k ? s1[i + 1] : 0.0;
                const double s22 = i + 2 < k ? s0[i + 2] : 0.0;
                s1[i] = -a1 * s11 - a2 * s12;
                s2[i] = -a1 * s12 - a2 * s22;
                s0[i] = 1.0 / D[i] - a1 * s1[i] - a2 * s2[i];
            }
            double t = 0.0;
            for (std::size_t i = 0; i < k; ++i) t += s0[i] * p0[i] + 2.0 * (s1[i] * p1[i] + s2[i] * p2[i]);
            return t;
        };

        double lambda = opt.gcv ? 0.0 : opt.lambda;
        if (opt.gcv) {
            double best = std::numeric_limits<double>::infinity();
            double best_lambda = 0.0;
            for (double e = opt.log10_rho_min; e <= opt.log10_rho_max + 1e-12; e += 0.5) {
                const double lam = std::pow(10.0, e) * scale;
                factor(lam);
                const double df_resid = lam * trace_minv_p();
                const auto res = residual(lam);
                double rss = 0.0;
                for (double v : res) rss += v * v;
                const double v = df_resid > 0.0 ? static_cast<double>(n) * rss / (df_resid * df_resid)
                                                : std::numeric_limits<double>::infinity();
                // Strict improvement only: ties resolve to less smoothing.
                if (std::isfinite(v) && v < best * (1.0 - 1e-9)) {
                    best = v;
                    best_lambda = lam;
                }
            }
            lambda = best_lambda;
            gcv_ = best;
        }
        lambda *= opt.lambda_multiplier;
        lambda_ = lambda;
        factor(lambda);
        const auto res = residual(lambda);
        f_.resize(n);
        max_residual_ = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            f_[i] = y[i] - res[i];
            max_residual_ = std::max(max_residual_, std::abs(res[i]));
        }
        for (std::size_t j = 0; j < k; ++j) m_[j + 1] = gamma[j];
    }

    template <int Order>
    double eval(double t) const {
        const auto n = x_.size();
        if (n == 0) throw NumericalError("spline: evaluation of an empty spline");
        // Linear continuation outside the knots.
        if (t <= x_.front() || t >= x_.back()) {
            const bool left = t <= x_.front();
            const std::size_t i = left ? 0 : n - 2;
            const double end = left ? x_.front() : x_.back();
            const double slope = segment<1>(i, end);
            if constexpr (Order == 0) return segment<0>(i, end) + slope * (t - end);
            if constexpr (Order == 1) return slope;
            if constexpr (Order == 2) return 0.0;
        }
        const auto it = std::upper_bound(x_.begin(), x_.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
        return segment<Order>(std::min(i, n - 2), t);
    }

    template <int Order>
    double segment(std::size_t i, double t) const {
        const double h = x_[i + 1] - x_[i];
        const double a = x_[i + 1] - t, b = t - x_[i];
        const double Mi = m_[i], Mj = m_[i + 1];
        const double ci = f_[i] / h - Mi * h / 6.0, cj = f_[i + 1] / h - Mj * h / 6.0;
        if constexpr (Order == 0) return (a * a * a * Mi + b * b * b * Mj) / (6.0 * h) + ci * a + cj * b;
        if constexpr (Order == 1) return (-a * a * Mi + b * b * Mj) / (2.0 * h) - ci + cj;
        return (a * Mi + b * Mj) / h;
    }
};

}  // namespace hota
