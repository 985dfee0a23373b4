#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>

#include "hota/errors.hpp"
#include "hota/model.hpp"
#include "hota/priors.hpp"
#include "hota/profile.hpp"
#include "hota/random.hpp"
#include "hota/tail_area.hpp"

namespace hota {

// Exact posterior of the genetic linkage model under a uniform prior -------

/// pi(theta | y) proportional to (2 + theta)^y1 (1 - theta)^(y2 + y3) theta^y4
/// on (0, 1), integrated numerically. The CDF is tabulated on equal cells so
/// that inversion needs a single short quadrature per evaluation.
class ExactLinkagePosterior {
  public:
    explicit ExactLinkagePosterior(const LinkageData& data, int cells = 256) : data_(data), cells_(cells) {
        validate(data_);
        // Log-density offset at the mode keeps the integrand O(1).
        log_peak_ = -std::numeric_limits<double>::infinity();
        for (int i = 1; i < 2000; ++i) log_peak_ = std::max(log_peak_, log_kernel(i / 2000.0));
        table_.assign(static_cast<std::size_t>(cells_) + 1, 0.0);
        for (int c = 0; c < cells_; ++c)
            table_[static_cast<std::size_t>(c) + 1] =
                table_[static_cast<std::size_t>(c)] + integrate(cell_edge(c), cell_edge(c + 1));
        norm_ = table_.back();
        for (double& v : table_) v /= norm_;
    }

    double density(double theta) const {
        if (!(theta > 0.0 && theta < 1.0)) return 0.0;
        return std::exp(log_kernel(theta) - log_peak_) / norm_;
    }

    /// Adaptive Gauss-Kronrod integral of the normalized density over (0, theta0].
    double cdf(double theta0) const {
        if (!(theta0 >= 0.0 && theta0 <= 1.0)) throw DomainError("exact_linkage_cdf: theta0 must lie in [0, 1]");
        if (theta0 == 0.0) return 0.0;
        if (theta0 == 1.0) return 1.0;
        return std::min(1.0, integrate(0.0, theta0) / norm_);
    }

    /// Tabulated CDF: cell prefix sum plus one panel.
    double fast_cdf(double theta0) const {
        if (theta0 <= 0.0) return 0.0;
        if (theta0 >= 1.0) return 1.0;
        const int c = std::min(cells_ - 1, static_cast<int>(theta0 * cells_));
        return table_[static_cast<std::size_t>(c)] + panel(cell_edge(c), theta0) / norm_;
    }

    /// Root of fast_cdf(theta) = p inside its cell; Newton steps, falling
    /// back to bisection when a step leaves the bracket.
    double quantile(double p) const {
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile: p must lie in [0, 1]");
        const auto it = std::upper_bound(table_.begin(), table_.end(), p);
        int c = static_cast<int>(it - table_.begin()) - 1;
        c = std::clamp(c, 0, cells_ - 1);
        double lo = cell_edge(c), hi = cell_edge(c + 1);
        double x = 0.5 * (lo + hi);
        for (int i = 0; i < 100 && hi - lo > 1e-13; ++i) {
            const double f = fast_cdf(x) - p;
            if (f == 0.0) return x;
            (f < 0.0 ? lo : hi) = x;
            const double d = density(x);
            double nx = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
            if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
            if (std::abs(nx - x) < 1e-15) return nx;
            x = nx;
        }
        return x;
    }

    double moment(int k) const {
        auto f = [&](double t) { return std::pow(t, k) * std::exp(log_kernel(t) - log_peak_); };
        double s = 0.0;
        for (int c = 0; c < cells_; ++c)
            s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, cell_edge(c), cell_edge(c + 1), 6, 1e-11);
        return s / norm_;
    }

    double mean() const { return moment(1); }
    double sd() const {
        const double m = mean();
        return std::sqrt(moment(2) - m * m);
    }

  private:
    LinkageData data_;
    int cells_;
    double log_peak_ = 0.0, norm_ = 1.0;
    std::vector<double> table_;

    double cell_edge(int c) const { return static_cast<double>(c) / cells_; }

    double log_kernel(double t) const {
        if (!(t > 0.0 && t < 1.0)) return -std::numeric_limits<double>::infinity();
        return data_.counts[0] * std::log(2.0 + t) + (data_.counts[1] + data_.counts[2]) * std::log1p(-t) +
               data_.counts[3] * std::log(t);
    }

    double kernel(double t) const { return std::exp(log_kernel(t) - log_peak_); }

    double integrate(double a, double b) const {
        auto f = [&](double t) { return kernel(t); };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 8, 1e-11);
    }

    double panel(double a, double b) const {
        if (b <= a) return 0.0;
        auto f = [&](double t) { return kernel(t); };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 0);
    }
};

inline double exact_linkage_cdf(double theta0, const LinkageData& data) {
    return ExactLinkagePosterior(data).cdf(theta0);
}

/// Inverse-CDF draws from the exact linkage posterior, using the same
/// normal stream as hota_sample (u = Phi(z)).
inline SampleSet exact_linkage_sample(std::size_t T, std::uint64_t seed, const LinkageData& data) {
    if (T < 1) throw ValidationError("exact_linkage_sample: T must be >= 1");
    const ExactLinkagePosterior post(data);
    const auto z = standard_normal_stream(T, seed);
    SampleSet s;
    s.seed = seed;
    s.curve_ref = "exact:linkage";
    s.draws.resize(T);
    for (std::size_t i = 0; i < T; ++i) s.draws[i] = post.quantile(normal::cdf(z[i]));
    return s;
}

// Random-walk Metropolis-Hastings ---------------------------------------------

struct MHConfig {
    std::size_t iterations = 1'005'000;
    std::size_t burn_in = 5'000;
    std::size_t thin = 10;
    /// Per-coordinate random-walk standard deviations on the working scale.
    /// Empty: 2.4 / sqrt(d) times the MLE standard errors.
    Vector proposal_scale;
    std::uint64_t seed = 42;
    /// Tune a global scale factor during burn-in, then freeze it.
    bool adapt = true;
    /// Correlate proposal coordinates like the inverse observed information.
    bool correlated = true;
    bool check_autocorrelation = true;
    double max_lag10_acf = 0.05;

    std::size_t retained() const { return iterations > burn_in ? (iterations - burn_in) / thin : 0; }

    static MHConfig for_draws(std::size_t retained, std::size_t thin, std::uint64_t seed, std::size_t burn_in = 5000) {
        MHConfig c;
        c.thin = thin;
        c.burn_in = burn_in;
        c.iterations = burn_in + retained * thin;
        c.seed = seed;
        return c;
    }

    void validate() const {
        if (!(iterations > burn_in)) throw ValidationError("MH: iterations must exceed burn_in");
        if (thin < 1) throw ValidationError("MH: thin must be >= 1");
    }
};

struct MHResult {
    Matrix draws;  ///< retained x d, natural scale
    std::vector<std::string> param_names;
    double acceptance_rate = 0.0;
    double scale_factor = 1.0;
    Vector lag10_acf;

    std::vector<double> column(int j) const {
        std::vector<double> v(static_cast<std::size_t>(draws.rows()));
        for (Eigen::Index i = 0; i < draws.rows(); ++i) v[static_cast<std::size_t>(i)] = draws(i, j);
        return v;
    }
};

/// Sample autocorrelation at `lag`.
inline double autocorrelation(const std::vector<double>& x, std::size_t lag) {
    const std::size_t n = x.size();
    if (lag >= n) return 0.0;
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(n);
    double c0 = 0.0, ck = 0.0;
    for (std::size_t i = 0; i < n; ++i) c0 += (x[i] - mu) * (x[i] - mu);
    for (std::size_t i = 0; i + lag < n; ++i) ck += (x[i] - mu) * (x[i + lag] - mu);
    return c0 > 0.0 ? ck / c0 : 0.0;
}

inline MHResult mh_sample(const ModelSpec& model, const PriorSpec& prior, const MHConfig& cfg,
                          const FitResult* fit_hint = nullptr) {
    if (prior.kind == PriorKind::matching)
        throw ValidationError("MH: the matching prior is defined for a scalar parameter only");
    cfg.validate();
    const int d = model.dim();
    const FitResult fit = fit_hint ? *fit_hint : fit_mle(model);

    std::vector<int> all(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) all[static_cast<std::size_t>(i)] = i;
    Matrix info = detail::working_information(model, fit.theta_hat_working, all);
    if (prior.kind == PriorKind::diag_normal)
        for (int i = 0; i < d; ++i) {
            const double jac = jacobian(model.transforms[static_cast<std::size_t>(i)], fit.theta_hat_working[i]);
            info(i, i) += jac * jac / prior.k;
        }
    Matrix cov = detail::inverse_if_pd(info);
    if (!cov.size()) throw NumericalError("MH: information at the MLE is not positive definite");
    const Vector sd = cov.diagonal().cwiseSqrt();
    Vector scale = cfg.proposal_scale.size() ? cfg.proposal_scale : Vector(2.4 / std::sqrt(double(d)) * sd);
    if (scale.size() != d || !(scale.array() > 0.0).all()) throw ValidationError("MH: proposal_scale must have d positive entries");
    Matrix L = Matrix::Identity(d, d);
    if (cfg.correlated) {
        const Matrix corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
        L = corr.llt().matrixL();
    }

    auto log_target = [&](const Vector& u) {
        const Vector theta = model.to_natural(u);
        double v = model.loglik_natural(theta);
        if (!std::isfinite(v)) return v;
        v += log_prior_density(prior, theta);
        for (int i = 0; i < d; ++i) v += std::log(jacobian(model.transforms[static_cast<std::size_t>(i)], u[i]));
        return v;
    };

    std::mt19937_64 eng(substream_seed(cfg.seed, 0x4D48));
    Vector u = fit.theta_hat_working;
    double lt = log_target(u);
    double s = 1.0;
    const double target_acc = d == 1 ? 0.44 : 0.27;
    const std::size_t batch = 100;
    std::size_t batch_acc = 0, nbatch = 0, accepted = 0, post = 0;

    MHResult res;
    res.param_names = model.param_names;
    res.draws.resize(static_cast<Eigen::Index>(cfg.retained()), d);
    Eigen::Index row = 0;
    Vector eps(d), prop(d);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (int i = 0; i < d; ++i) eps[i] = standard_normal(eng);
        prop = u + s * scale.cwiseProduct(L * eps);
        const double lp = log_target(prop);
        const bool take = std::isfinite(lp) && std::log(open_uniform(eng)) < lp - lt;
        if (take) {
            u = prop;
            lt = lp;
        }
        if (it < cfg.burn_in) {
            batch_acc += take;
            if ((it + 1) % batch == 0 && cfg.adapt) {
                const double rate = static_cast<double>(batch_acc) / batch;
                s *= std::exp((rate - target_acc) / std::sqrt(static_cast<double>(++nbatch)));
                batch_acc = 0;
            }
            continue;
        }
        accepted += take;
        ++post;
        if ((it - cfg.burn_in) % cfg.thin == cfg.thin - 1 && row < res.draws.rows())
            res.draws.row(row++) = model.to_natural(u).transpose();
    }
    res.acceptance_rate = post ? static_cast<double>(accepted) / static_cast<double>(post) : 0.0;
    res.scale_factor = s;
    if (res.acceptance_rate < 0.1 || res.acceptance_rate > 0.6)
        throw NumericalError("MH: acceptance rate " + detail::fmt(res.acceptance_rate) +
                             " outside [0.1, 0.6]; adjust proposal_scale");
    res.lag10_acf.resize(d);
    for (int j = 0; j < d; ++j) res.lag10_acf[j] = autocorrelation(res.column(j), 10);
    if (cfg.check_autocorrelation)
        for (int j = 0; j < d; ++j)
            if (std::abs(res.lag10_acf[j]) > cfg.max_lag10_acf)
                throw NumericalError("MH: lag-10 autocorrelation of " + model.param_names[static_cast<std::size_t>(j)] +
                                     " is " + detail::fmt(res.lag10_acf[j]) + " > " + detail::fmt(cfg.max_lag10_acf) +
                                     "; increase thinning");
    return res;
}

/// One column per parameter, header = parameter names.
inline void write_joint_csv(const MHResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    out.precision(15);
    for (std::size_t j = 0; j < r.param_names.size(); ++j) out << (j ? "," : "") << r.param_names[j];
    out << "\n";
    for (Eigen::Index i = 0; i < r.draws.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.draws.cols(); ++j) out << (j ? "," : "") << r.draws(i, j);
        out << "\n";
    }
}

}  // namespace hota
