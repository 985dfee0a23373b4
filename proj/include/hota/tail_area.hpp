#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hota/errors.hpp"
#include "hota/normal.hpp"
#include "hota/priors.hpp"
#include "hota/profile.hpp"
#include "hota/random.hpp"
#include "hota/spline.hpp"

namespace hota {

/// Where r*_B is tabulated. Widths are in units of SE(psi) = j_p(psi_hat)^{-1/2}
/// measured on the working scale of psi.
struct GridPolicy {
    int n_grid = 50;
    double half_width = 4.0;
    /// Points within delta * SE of psi_hat are left out of the r* table (0/0 there).
    double delta = 0.25;
    /// The tabulated r* values must reach +-target_r_range.
    double target_r_range = 4.5;
    int max_extension = 60;
    /// Extension steps grow geometrically by this factor.
    double growth = 1.25;
    int max_smoothing_steps = 6;

    void validate() const {
        if (n_grid < 20) throw ValidationError("grid policy: n_grid must be >= 20");
        if (!(delta >= 0.0 && delta < half_width)) throw ValidationError("grid policy: need 0 <= delta < half_width");
        if (!(target_r_range >= 4.0)) throw ValidationError("grid policy: target_r_range must be >= 4");
        if (!(growth >= 1.0)) throw ValidationError("grid policy: growth must be >= 1");
    }
};

// Pointwise quantities -----------------------------------------------------

/// Signed profile likelihood root sign(psi_hat - psi) sqrt(2 (l_p(psi_hat) - l_p(psi))).
inline double r_p(double psi, const ProfileCurve& curve) {
    const double rad = 2.0 * (curve.ell_hat() - curve.ell_p(psi));
    if (rad < -1e-10)
        throw CurveError("profile log-likelihood exceeds its maximum at psi = " + detail::fmt(psi) +
                         " (deviance " + detail::fmt(rad) + ")");
    const double r = std::sqrt(std::max(rad, 0.0));
    return curve.psi_hat() > psi ? r : (curve.psi_hat() < psi ? -r : 0.0);
}

namespace detail {

/// log q_B split as log|leading factor| + log of the exponential factors,
/// so that extreme prior ratios do not under/overflow.
struct LogQ {
    double lead = 0.0;  ///< signed leading factor (l_p' or psi_hat - psi)
    double log_rest = 0.0;
    double value() const { return lead * std::exp(log_rest); }
};

inline LogQ log_q_b(double psi, const ProfileCurve& curve, const PriorSpec& prior) {
    const double det_term = 0.5 * (curve.log_det_j_ll(psi) - curve.log_det_hat());
    if (prior.kind == PriorKind::matching) {
        if (!curve.model().supports_matching)
            throw ValidationError("model '" + curve.model().name + "' has no closed-form matching-prior q_B");
        return {curve.psi_hat() - psi, det_term + 0.5 * std::log(curve.j_p_hat())};
    }
    const double prior_term = log_prior_ratio(prior, curve.fit().theta_hat, curve.theta_at(psi));
    return {curve.ell_p_prime(psi), det_term + prior_term - 0.5 * std::log(curve.j_p_hat())};
}

}  // namespace detail

inline double q_b(double psi, const ProfileCurve& curve, const PriorSpec& prior) {
    if (prior.kind == PriorKind::matching) throw ValidationError("q_b: use q_b_matching for the matching prior");
    return detail::log_q_b(psi, curve, prior).value();
}

/// Closed form of q_B under the matching prior, valid for models that
/// register it (logistic regression).
inline double q_b_matching(double psi, const ProfileCurve& curve) {
    return detail::log_q_b(psi, curve, PriorSpec::matching()).value();
}

inline double q_b_for(double psi, const ProfileCurve& curve, const PriorSpec& prior) {
    return detail::log_q_b(psi, curve, prior).value();
}

inline double r_star_from(double r, double q, double psi) {
    if (r == 0.0) throw CurveError("r*_B is undefined at psi_hat (psi = " + detail::fmt(psi) + ")");
    const double ratio = q / r;
    if (!(ratio > 0.0) || !std::isfinite(ratio))
        throw CurveError("q_B / r_p = " + detail::fmt(ratio) + " is not positive at psi = " + detail::fmt(psi));
    return r + std::log(ratio) / r;
}

namespace detail {

inline double r_star_log(double r, const LogQ& q, double psi) {
    if (r == 0.0) throw CurveError("r*_B is undefined at psi_hat (psi = " + detail::fmt(psi) + ")");
    const double ratio = q.lead / r;
    if (!(ratio > 0.0) || !std::isfinite(ratio) || !std::isfinite(q.log_rest))
        throw CurveError("q_B / r_p is not positive and finite at psi = " + detail::fmt(psi) + " (leading ratio " +
                         detail::fmt(ratio) + ", log factor " + detail::fmt(q.log_rest) + ")");
    return r + (std::log(ratio) + q.log_rest) / r;
}

}  // namespace detail

/// Modified likelihood root r_p + log(q_B / r_p) / r_p.
inline double r_star_b(double psi, const ProfileCurve& curve, const PriorSpec& prior) {
    return detail::r_star_log(r_p(psi, curve), detail::log_q_b(psi, curve, prior), psi);
}

// The r* curve --------------------------------------------------------------

namespace detail {
inline int monotone_direction(const std::vector<double>& v) {
    bool dec = true, inc = true;
    for (std::size_t i = 1; i < v.size(); ++i) {
        dec = dec && v[i] < v[i - 1];
        inc = inc && v[i] > v[i - 1];
    }
    return dec ? -1 : (inc ? 1 : 0);
}

}  // namespace detail

/// r*_B tabulated on a grid, with its smoothed inverse z -> psi.
class RStarCurve {
  public:
    std::shared_ptr<const ProfileCurve> profile;
    PriorSpec prior;
    GridPolicy policy;
    std::vector<double> psi_grid;  ///< natural scale, increasing, delta band excluded
    std::vector<double> r_p;
    std::vector<double> q_b;
    std::vector<double> r_star;
    /// r* decreases in psi (the usual case with the r_p sign convention).
    bool decreasing = true;
    bool boundary_low = false;   ///< extension stopped at the lower end of the domain
    bool boundary_high = false;
    int extension_points = 0;

    double r_star_min() const { return rmin_; }
    double r_star_max() const { return rmax_; }
    const SmoothingSpline& inverse_spline() const { return inverse_; }

    /// psi solving r*_B(psi) = z on the smoothed curve; z is clamped to the
    /// tabulated r* range.
    double inverse(double z) const {
        z = std::clamp(z, rmin_, rmax_);
        return to_natural(profile->psi_transform(), inverse_(z));
    }

    bool covers(double z) const { return z >= rmin_ && z <= rmax_; }

    double psi_low() const { return std::min(inverse(rmin_), inverse(rmax_)); }
    double psi_high() const { return std::max(inverse(rmin_), inverse(rmax_)); }

    /// z with inverse(z) = psi0.
    double z_at(double psi0) const {
        if (!(psi0 >= psi_low() && psi0 <= psi_high()))
            throw DomainError("psi0 = " + detail::fmt(psi0) + " outside the tabulated range [" + detail::fmt(psi_low()) +
                              ", " + detail::fmt(psi_high()) + "]");
        const double target = to_working(profile->psi_transform(), psi0);
        double lo = rmin_, hi = rmax_;
        const bool inc = inverse_(hi) > inverse_(lo);
        for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool below = inverse_(mid) < target;
            if (below == inc) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

    /// Posterior probability of (-inf, psi0], increasing in psi0.
    double tail_probability(double psi0) const {
        const double z = z_at(psi0);
        return decreasing ? normal::cdf(-z) : normal::cdf(z);
    }

    double survivor_probability(double psi0) const { return 1.0 - tail_probability(psi0); }

    std::string provenance() const {
        std::ostringstream os;
        os << profile->model().name << ":" << profile->psi_name() << " prior=" << prior.to_string()
           << " grid=" << psi_grid.size() << " r*=[" << rmin_ << "," << rmax_ << "]";
        return os.str();
    }

    /// Fits the inverse spline. Between neighbouring grid points on the same
    /// side of psi_hat, `refine` extra r*_B values are taken from the profile
    /// splines so that the inverse is not a coarse interpolant in the tails.
    void fit_inverse(int refine = 3) {
        const Transform t = profile->psi_transform();
        const double band = policy.delta * profile->se() / jacobian(t, profile->psi_hat_working());
        std::vector<double> u, z;
        for (std::size_t i = 0; i < r_star.size(); ++i) {
            u.push_back(to_working(t, psi_grid[i]));
            z.push_back(r_star[i]);
            if (i + 1 == r_star.size() || refine == 0) continue;
            const double u0 = to_working(t, psi_grid[i]), u1 = to_working(t, psi_grid[i + 1]);
            auto add = [&](double uk) {
                u.push_back(uk);
                z.push_back(r_star_b(to_natural(t, uk), *profile, prior));
            };
            if ((psi_grid[i] < profile->psi_hat()) == (psi_grid[i + 1] < profile->psi_hat())) {
                for (int k = 1; k <= refine; ++k) add(u0 + (u1 - u0) * k / (refine + 1.0));
                continue;
            }
            // Across psi_hat: fill up to both edges of the delta band.
            const double a = profile->psi_hat_working() - band, b = profile->psi_hat_working() + band;
            if (a > u0)
                for (int k = 1; k <= refine; ++k) add(u0 + (a - u0) * k / refine);
            if (u1 > b)
                for (int k = 0; k < refine; ++k) add(b + (u1 - b) * k / refine);
        }
        if (detail::monotone_direction(z) != (decreasing ? -1 : 1)) {
            // Refinement exposed wiggles the coarse table does not have.
            if (refine > 0) return fit_inverse(0);
            throw CurveError("r*_B table is not monotone");
        }
        if (decreasing) {
            std::reverse(u.begin(), u.end());
            std::reverse(z.begin(), z.end());
        }
        inverse_ = SmoothingSpline(z, u, SmoothingSpline::Options{});
        rmin_ = z.front();
        rmax_ = z.back();
        // The inverse must itself be strictly monotone; check densely.
        double prev = inverse_(rmin_);
        const int m = 4000;
        for (int i = 1; i <= m; ++i) {
            const double v = inverse_(rmin_ + (rmax_ - rmin_) * i / m);
            if ((decreasing && !(v < prev)) || (!decreasing && !(v > prev)))
                throw CurveError("smoothed inverse of r*_B is not monotone near z = " +
                                 detail::fmt(rmin_ + (rmax_ - rmin_) * i / m));
            prev = v;
        }
    }

  private:
    SmoothingSpline inverse_;
    double rmin_ = 0.0, rmax_ = 0.0;
};

namespace detail {

struct RStarTable {
    std::vector<double> psi, rp, qb, rs;
};

inline RStarTable tabulate(const ProfileCurve& profile, const PriorSpec& prior, double band_working) {
    RStarTable t;
    for (const auto& p : profile.points()) {
        if (std::abs(p.psi_working - profile.psi_hat_working()) < band_working) continue;
        const double r = hota::r_p(p.psi, profile);
        const detail::LogQ q = log_q_b(p.psi, profile, prior);
        t.psi.push_back(p.psi);
        t.rp.push_back(r);
        t.qb.push_back(q.value());
        t.rs.push_back(r_star_log(r, q, p.psi));
    }
    return t;
}

/// r*_B at a profile point from its own exact quantities (envelope score,
/// point determinant) rather than the splines. NaN where undefined.
inline double pointwise_r_star(const ProfileCurve& curve, const ProfilePoint& p, const PriorSpec& prior) {
    const double rad = 2.0 * (curve.ell_hat() - p.ell_p);
    const double r = std::sqrt(std::max(rad, 0.0)) * (curve.psi_hat() > p.psi ? 1.0 : -1.0);
    const double det_term = 0.5 * (p.log_det_j_ll - curve.log_det_hat());
    double lead, rest;
    if (prior.kind == PriorKind::matching) {
        lead = curve.psi_hat() - p.psi;
        rest = det_term + 0.5 * std::log(curve.j_p_hat());
    } else {
        lead = p.score;
        rest = det_term + log_prior_ratio(prior, curve.fit().theta_hat, p.theta_psi) - 0.5 * std::log(curve.j_p_hat());
    }
    if (rad <= 0.0 || !(lead / r > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return r + (std::log(lead / r) + rest) / r;
}

inline std::string dump(const RStarTable& t) {
    std::ostringstream os;
    os.precision(8);
    os << "psi,r_p,q_b,r_star\n";
    for (std::size_t i = 0; i < t.psi.size(); ++i) os << t.psi[i] << "," << t.rp[i] << "," << t.qb[i] << "," << t.rs[i] << "\n";
    return os.str();
}

}  // namespace detail

/// Working-scale grid psi_hat +- half_width SE. Points inside the delta band
/// are kept as profile knots so the l_p spline has support across psi_hat;
/// the r* table drops them.
inline std::vector<double> default_grid(const FitResult& fit, const ModelSpec& model, int psi_index,
                                        const GridPolicy& policy) {
    policy.validate();
    const Transform t = model.transforms[static_cast<std::size_t>(psi_index)];
    const int d = model.dim();
    const Matrix cov = fit.obs_info.llt().solve(Matrix::Identity(d, d));
    const double se = std::sqrt(cov(psi_index, psi_index));
    const double u_hat = fit.theta_hat_working[psi_index];
    const double se_u = se / jacobian(t, u_hat);
    std::vector<double> grid;
    for (int i = 0; i < policy.n_grid; ++i) {
        const double s = -policy.half_width + 2.0 * policy.half_width * i / (policy.n_grid - 1);
        const double psi = to_natural(t, u_hat + s * se_u);
        if (in_domain(t, psi)) grid.push_back(psi);
    }
    return grid;
}

/// Tabulates r*_B on the profile's points, extends the profile outward until
/// the r* values cover +-target_r_range, and fits the smoothed inverse.
inline RStarCurve build_rstar_curve(const ProfileCurve& base, const PriorSpec& prior, const GridPolicy& policy = {},
                                    const FitOptions& fit_opt = {}) {
    policy.validate();
    if (prior.kind == PriorKind::matching && !base.model().supports_matching)
        throw ValidationError("the matching prior is only available for models with a closed-form q_B (logistic)");
    const ModelSpec& model = base.model();
    const int idx = base.psi_index();
    const Transform t = base.psi_transform();
    const double se_u = base.se() / jacobian(t, base.psi_hat_working());
    const double band = policy.delta * se_u;
    const double step0 = 2.0 * policy.half_width * se_u / (policy.n_grid - 1);

    ProfileCurve profile = base;
    std::vector<ProfilePoint> extra;
    bool stop_low = false, stop_high = false, hit_low = false, hit_high = false;
    int added_low = 0, added_high = 0;
    detail::RStarTable table;
    double smoothing = base.smoothing_multiplier();

    for (;;) {
        table = detail::tabulate(profile, prior, band);
        if (table.rs.size() < 2) throw CurveError("r* grid has fewer than two usable points");
        const int dir = detail::monotone_direction(table.rs);
        if (dir == 0) {
            // Non-monotone tabulation: smooth the profile harder and retry.
            if (profile.scalar() || smoothing >= std::pow(10.0, policy.max_smoothing_steps))
                throw CurveError("r*_B is not monotone in psi after smoothing escalation; curve:\n" + detail::dump(table));
            smoothing *= 10.0;
            profile = base.with_points(extra, smoothing);
            continue;
        }
        // Side of the grid carrying large positive r* (low psi when decreasing).
        const double r_lowend = table.rs.front(), r_highend = table.rs.back();
        const bool need_low = !stop_low && std::max(dir < 0 ? r_lowend : -r_lowend, 0.0) < policy.target_r_range;
        const bool need_high = !stop_high && std::max(dir < 0 ? -r_highend : r_highend, 0.0) < policy.target_r_range;
        if (!need_low && !need_high) break;

        // Grows one side point by point, judging coverage from pointwise
        // r* values so that the splines are refitted once per pass.
        auto extend = [&](bool low) {
            const auto& pts = profile.points();
            ProfilePoint end = low ? pts.front() : pts.back();
            int& added = low ? added_low : added_high;
            const double sign = (dir < 0) == low ? 1.0 : -1.0;
            bool any = false;
            while (added < policy.max_extension) {
                const double step = step0 * std::pow(policy.growth, added + 1);
                const double u_new = end.psi_working + (low ? -step : step);
                const double psi_new = to_natural(t, u_new);
                if (!in_domain(t, psi_new) || psi_new == end.psi) {
                    (low ? hit_low : hit_high) = true;
                    return any;
                }
                try {
                    ProfilePoint p = fit_constrained(model, idx, psi_new, end.lambda_hat, fit_opt);
                    if (!std::isfinite(p.ell_p)) throw NumericalError("non-finite profile value");
                    end = p;
                    extra.push_back(std::move(p));
                } catch (const NumericalError&) {
                    (low ? hit_low : hit_high) = true;
                    return any;
                }
                ++added;
                any = true;
                const double rs = detail::pointwise_r_star(profile, end, prior);
                if (std::isfinite(rs) && sign * rs >= policy.target_r_range + 0.1) return true;
            }
            return any;
        };
        if (need_low && !extend(true)) stop_low = true;
        if (need_high && !extend(false)) stop_high = true;
        profile = base.with_points(extra, smoothing);
    }

    RStarCurve c;
    c.profile = std::make_shared<const ProfileCurve>(std::move(profile));
    c.prior = prior;
    c.policy = policy;
    c.psi_grid = std::move(table.psi);
    c.r_p = std::move(table.rp);
    c.q_b = std::move(table.qb);
    c.r_star = std::move(table.rs);
    c.decreasing = detail::monotone_direction(c.r_star) < 0;
    c.boundary_low = hit_low;
    c.boundary_high = hit_high;
    c.extension_points = added_low + added_high;
    c.fit_inverse();
    return c;
}

/// Fits the model, profiles psi on the default grid and builds the curve.
inline RStarCurve build_rstar_curve(const ModelSpec& model, int psi_index, const PriorSpec& prior,
                                    const GridPolicy& policy = {}, const ProfileOptions& opt = {}) {
    const FitResult fit = fit_mle(model, opt.fit);
    const auto grid = default_grid(fit, model, psi_index, policy);
    const ProfileCurve profile = build_profile(model, fit, psi_index, grid, opt);
    return build_rstar_curve(profile, prior, policy, opt.fit);
}

// Sampling -------------------------------------------------------------------

struct SampleSet {
    std::vector<double> draws;
    std::uint64_t seed = 0;
    std::size_t clamped = 0;
    std::string curve_ref;
    std::string warning;
};

/// Maps given standard normal deviates through the curve's inverse.
inline SampleSet hota_sample_from_normals(const RStarCurve& curve, const std::vector<double>& z, std::uint64_t seed = 0) {
    SampleSet s;
    s.seed = seed;
    s.curve_ref = curve.provenance();
    s.draws.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!curve.covers(z[i])) ++s.clamped;
        s.draws[i] = curve.inverse(z[i]);
    }
    if (!z.empty() && static_cast<double>(s.clamped) > 1e-4 * static_cast<double>(z.size()))
        s.warning = std::to_string(s.clamped) + " of " + std::to_string(z.size()) +
                    " normal deviates fell outside the tabulated r* range and were clamped";
    return s;
}

/// T independent draws from the approximate marginal posterior. The output
/// depends only on (curve, T, seed), whatever the number of threads.
inline SampleSet hota_sample(const RStarCurve& curve, std::size_t T, std::uint64_t seed, unsigned threads = 1) {
    if (T < 1) throw ValidationError("hota_sample: T must be >= 1");
    std::vector<double> z(T);
    const std::size_t blocks = (T + kNormalBlockSize - 1) / kNormalBlockSize;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
    auto work = [&](unsigned w) {
        for (std::size_t b = w; b < blocks; b += threads) {
            const std::size_t begin = b * kNormalBlockSize;
            fill_normal_block(seed, b, z.data() + begin, std::min(kNormalBlockSize, T - begin));
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    return hota_sample_from_normals(curve, z, seed);
}

// Laplace marginal density ---------------------------------------------------

/// Unnormalized log of the Laplace approximation to pi(psi | y).
inline double laplace_log_kernel(double psi, const ProfileCurve& curve, const PriorSpec& prior) {
    if (prior.kind == PriorKind::matching)
        throw ValidationError("laplace_marginal_density: the matching prior has no joint density");
    return 0.5 * std::log(curve.j_p_hat()) + (curve.ell_p(psi) - curve.ell_hat()) +
           0.5 * (curve.log_det_hat() - curve.log_det_j_ll(psi)) -
           log_prior_ratio(prior, curve.fit().theta_hat, curve.theta_at(psi));
}

/// Laplace approximation to pi(psi | y) on `psi_values` (increasing),
/// normalized by the trapezoidal rule over those points.
inline std::vector<double> laplace_marginal_density(const std::vector<double>& psi_values, const ProfileCurve& curve,
                                                    const PriorSpec& prior) {
    if (psi_values.size() < 2) throw ValidationError("laplace_marginal_density: need at least two points");
    std::vector<double> logd(psi_values.size());
    for (std::size_t i = 0; i < psi_values.size(); ++i) {
        if (i && !(psi_values[i] > psi_values[i - 1]))
            throw ValidationError("laplace_marginal_density: points must increase");
        logd[i] = laplace_log_kernel(psi_values[i], curve, prior);
    }
    const double top = *std::max_element(logd.begin(), logd.end());
    std::vector<double> dens(logd.size());
    for (std::size_t i = 0; i < logd.size(); ++i) dens[i] = std::exp(logd[i] - top);
    double area = 0.0;
    for (std::size_t i = 1; i < dens.size(); ++i) area += 0.5 * (dens[i] + dens[i - 1]) * (psi_values[i] - psi_values[i - 1]);
    for (double& v : dens) v /= area;
    return dens;
}

}  // namespace hota
