#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hota/errors.hpp"
#include "hota/model.hpp"
#include "hota/numdiff.hpp"
#include "hota/optimize.hpp"
#include "hota/spline.hpp"

namespace hota {

struct FitOptions {
    OptimOptions optim;
    int restarts = 3;
    std::uint64_t jitter_seed = 20130419;
};

struct FitResult {
    Vector theta_hat_working;
    Vector theta_hat;
    double loglik_max = 0.0;
    Matrix obs_info;  ///< j(theta_hat), natural scale
    Vector se;
    int iterations = 0;
    double rel_grad = 0.0;
};

struct ProfilePoint {
    double psi = 0.0;          ///< natural scale
    double psi_working = 0.0;
    Vector lambda_hat;         ///< constrained MLE of the nuisance block, natural scale
    double ell_p = 0.0;
    double log_det_j_ll = 0.0; ///< log |j_lambda,lambda(psi, lambda_hat_psi)|; 0 when d = 1
    Vector theta_psi;          ///< (psi, lambda_hat_psi) assembled, natural scale
    double score = 0.0;        ///< d l / d psi at theta_psi, the profile score by the envelope theorem
    double rel_grad = 0.0;
};

namespace detail {

inline std::vector<int> nuisance_coords(int dim, int psi_index) {
    std::vector<int> c;
    for (int i = 0; i < dim; ++i)
        if (i != psi_index) c.push_back(i);
    return c;
}

/// Curvature of the log-likelihood on the working scale over `coords`,
/// by central differences of the working score.
inline Matrix working_information(const ModelSpec& model, const Vector& u, const std::vector<int>& coords) {
    const auto k = static_cast<Eigen::Index>(coords.size());
    Matrix J(k, k);
    Vector probe = u;
    for (Eigen::Index b = 0; b < k; ++b) {
        const int cb = coords[static_cast<std::size_t>(b)];
        const double h = central_step(u[cb]);
        probe[cb] = u[cb] + h;
        const Vector gp = working_gradient(model, probe);
        probe[cb] = u[cb] - h;
        const Vector gm = working_gradient(model, probe);
        probe[cb] = u[cb];
        for (Eigen::Index a = 0; a < k; ++a) {
            const int ca = coords[static_cast<std::size_t>(a)];
            J(a, b) = -(gp[ca] - gm[ca]) / (2.0 * h);
        }
    }
    return 0.5 * (J + J.transpose());
}

/// Inverse of J when J is positive definite; nullopt-like empty matrix otherwise.
inline Matrix inverse_if_pd(const Matrix& J) {
    if (!J.allFinite()) return {};
    Eigen::LLT<Matrix> llt(J);
    if (llt.info() != Eigen::Success) return {};
    return llt.solve(Matrix::Identity(J.rows(), J.cols()));
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace detail

/// Full maximum likelihood fit with observed information and standard errors.
inline FitResult fit_mle(const ModelSpec& model, const FitOptions& opt = {}) {
    const int d = model.dim();
    std::vector<int> all(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) all[static_cast<std::size_t>(i)] = i;

    auto f = [&](const Vector& u) { return model.loglik_working(u); };
    auto g = [&](const Vector& u) { return working_gradient(model, u); };

    const Vector u0 = model.to_working(model.start);
    if (!std::isfinite(f(u0))) throw ValidationError("model '" + model.name + "': log-likelihood not finite at the start point");

    std::mt19937_64 eng(opt.jitter_seed);
    OptimResult best;
    for (int attempt = 0; attempt <= opt.restarts; ++attempt) {
        Vector start = u0;
        if (attempt > 0)
            for (int i = 0; i < d; ++i) start[i] += 0.5 * (1.0 + std::abs(u0[i])) * standard_normal(eng);
        if (!std::isfinite(f(start))) continue;
        const Matrix H0 = detail::inverse_if_pd(detail::working_information(model, start, all));
        auto r = maximize_bfgs(f, g, start, H0.size() ? &H0 : nullptr, opt.optim);
        if (r.rel_grad > opt.optim.gtol)
            r = refine_newton(f, g, [&](const Vector& u) { return detail::working_information(model, u, all); }, std::move(r),
                              opt.optim);
        if (r.converged) {
            best = std::move(r);
            break;
        }
        if (!best.x.size() || r.f > best.f) best = std::move(r);
    }
    if (!best.converged)
        throw ConvergenceError("model '" + model.name + "': maximum likelihood fit did not converge (" + best.message +
                               ", relative gradient " + detail::fmt(best.rel_grad) + ")");

    FitResult fit;
    fit.theta_hat_working = best.x;
    fit.theta_hat = model.to_natural(best.x);
    fit.loglik_max = best.f;
    fit.iterations = best.iterations;
    fit.rel_grad = best.rel_grad;
    fit.obs_info = observed_information(model, fit.theta_hat);
    Eigen::LLT<Matrix> llt(fit.obs_info);
    if (llt.info() != Eigen::Success || !fit.obs_info.allFinite())
        throw ConvergenceError("model '" + model.name +
                               "': observed information is not positive definite at the optimum; no unique MLE");
    const Matrix cov = llt.solve(Matrix::Identity(d, d));
    fit.se = cov.diagonal().cwiseSqrt();
    for (int i = 0; i < d; ++i) {
        // A vanishing curvature relative to the parameter's magnitude means
        // the likelihood keeps rising along some direction (e.g. separated
        // binary data): there is no finite MLE.
        if (!std::isfinite(fit.se[i]) || fit.se[i] > 1e4 * std::max(1.0, std::abs(fit.theta_hat[i])))
            throw ConvergenceError("model '" + model.name + "': information about '" +
                                   model.param_names[static_cast<std::size_t>(i)] +
                                   "' is numerically zero; the MLE does not exist (diverging estimate)");
    }
    return fit;
}

/// Maximizes l(psi, lambda) over lambda for fixed psi (natural scale).
/// `warm_start` is the nuisance block on the natural scale.
inline ProfilePoint fit_constrained(const ModelSpec& model, int psi_index, double psi, const Vector& warm_start,
                                    const FitOptions& opt = {}) {
    const int d = model.dim();
    if (psi_index < 0 || psi_index >= d) throw ValidationError("psi index out of range");
    const Transform tpsi = model.transforms[static_cast<std::size_t>(psi_index)];
    if (!in_domain(tpsi, psi))
        throw DomainError("psi = " + detail::fmt(psi) + " is outside the domain of '" +
                          model.param_names[static_cast<std::size_t>(psi_index)] + "'");
    ProfilePoint pt;
    pt.psi = psi;
    pt.psi_working = to_working(tpsi, psi);
    const auto coords = detail::nuisance_coords(d, psi_index);

    if (d == 1) {
        pt.theta_psi = Vector::Constant(1, psi);
        pt.lambda_hat = Vector();
        pt.ell_p = model.loglik_natural(pt.theta_psi);
        pt.log_det_j_ll = 0.0;
        pt.score = natural_gradient(model, pt.theta_psi)[0];
        if (!std::isfinite(pt.ell_p)) throw NumericalError("log-likelihood not finite at psi = " + detail::fmt(psi));
        return pt;
    }

    auto assemble = [&](const Vector& v) {
        Vector u(d);
        u[psi_index] = pt.psi_working;
        for (std::size_t k = 0; k < coords.size(); ++k) u[coords[k]] = v[static_cast<Eigen::Index>(k)];
        return u;
    };
    auto f = [&](const Vector& v) { return model.loglik_working(assemble(v)); };
    auto g = [&](const Vector& v) {
        const Vector full = working_gradient(model, assemble(v));
        Vector out(static_cast<Eigen::Index>(coords.size()));
        for (std::size_t k = 0; k < coords.size(); ++k) out[static_cast<Eigen::Index>(k)] = full[coords[k]];
        return out;
    };

    Vector v0(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t k = 0; k < coords.size(); ++k)
        v0[static_cast<Eigen::Index>(k)] = to_working(model.transforms[static_cast<std::size_t>(coords[k])],
                                                      warm_start[static_cast<Eigen::Index>(k)]);

    std::mt19937_64 eng(opt.jitter_seed ^ std::hash<double>{}(psi));
    OptimResult best;
    for (int attempt = 0; attempt <= opt.restarts + 1; ++attempt) {
        Vector start = v0;
        if (attempt == opt.restarts + 1) {
            // Last resort: cold start from the model's default point.
            const Vector s = model.to_working(model.start);
            for (std::size_t k = 0; k < coords.size(); ++k) start[static_cast<Eigen::Index>(k)] = s[coords[k]];
        } else if (attempt > 0) {
            for (Eigen::Index i = 0; i < start.size(); ++i)
                start[i] += 0.25 * (1.0 + std::abs(v0[i])) * standard_normal(eng);
        }
        if (!std::isfinite(f(start))) continue;
        const Matrix H0 = detail::inverse_if_pd(detail::working_information(model, assemble(start), coords));
        auto r = maximize_bfgs(f, g, start, H0.size() ? &H0 : nullptr, opt.optim);
        if (r.rel_grad > opt.optim.gtol)
            r = refine_newton(f, g, [&](const Vector& v) { return detail::working_information(model, assemble(v), coords); },
                              std::move(r), opt.optim);
        if (r.converged) {
            best = std::move(r);
            break;
        }
        if (!best.x.size() || r.f > best.f) best = std::move(r);
    }
    if (!best.converged)
        throw ConvergenceError("constrained fit at psi = " + detail::fmt(psi) + " did not converge (" + best.message + ")");

    const Vector u = assemble(best.x);
    pt.theta_psi = model.to_natural(u);
    pt.lambda_hat.resize(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t k = 0; k < coords.size(); ++k) pt.lambda_hat[static_cast<Eigen::Index>(k)] = pt.theta_psi[coords[k]];
    pt.ell_p = best.f;
    pt.rel_grad = best.rel_grad;
    pt.score = natural_gradient(model, pt.theta_psi)[psi_index];
    const Matrix J = observed_information(model, pt.theta_psi, coords);
    Eigen::LLT<Matrix> llt(J);
    if (llt.info() != Eigen::Success || !J.allFinite())
        throw ConvergenceError("nuisance information j_ll is not positive definite at psi = " + detail::fmt(psi));
    pt.log_det_j_ll = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return pt;
}

/// Profile log-likelihood for one coordinate, tabulated on a grid and
/// smoothed. Splines are fitted against the working-scale coordinate of psi
/// and all public evaluators take and return natural-scale quantities.
class ProfileCurve {
  public:
    ProfileCurve() = default;

    ProfileCurve(ModelSpec model, int psi_index, FitResult fit, std::vector<ProfilePoint> points,
                 double smoothing_multiplier = 1.0)
        : model_(std::move(model)), psi_index_(psi_index), fit_(std::move(fit)), smoothing_(smoothing_multiplier) {
        const int d = model_.dim();
        const auto coords = detail::nuisance_coords(d, psi_index_);
        psi_transform_ = model_.transforms[static_cast<std::size_t>(psi_index_)];
        psi_hat_ = fit_.theta_hat[psi_index_];
        psi_hat_working_ = fit_.theta_hat_working[psi_index_];
        ell_hat_ = fit_.loglik_max;
        if (d == 1) {
            log_det_hat_ = 0.0;
            j_p_hat_ = fit_.obs_info(0, 0);
        } else {
            const Matrix J = observed_information(model_, fit_.theta_hat, coords);
            Eigen::LLT<Matrix> llt(J);
            if (llt.info() != Eigen::Success) throw ConvergenceError("j_ll not positive definite at the MLE");
            log_det_hat_ = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            // |j_p| = |j| / |j_ll| = 1 / (j^{-1})_{psi psi}
            const Matrix cov = fit_.obs_info.llt().solve(Matrix::Identity(d, d));
            j_p_hat_ = 1.0 / cov(psi_index_, psi_index_);
        }
        if (!(j_p_hat_ > 0.0)) throw ConvergenceError("profile information at the MLE is not positive");

        // Make sure the MLE itself is one of the points, then order by psi.
        const double tol = 1e-9 * std::max(1.0, std::abs(psi_hat_));
        points.erase(std::remove_if(points.begin(), points.end(),
                                    [&](const ProfilePoint& p) { return std::abs(p.psi - psi_hat_) <= tol; }),
                     points.end());
        points.push_back(mle_point());
        std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.psi < b.psi; });
        for (std::size_t i = 1; i < points.size(); ++i)
            if (!(points[i].psi_working > points[i - 1].psi_working))
                throw ValidationError("profile grid must be strictly increasing");
        points_ = std::move(points);

        std::vector<double> u, ell, logdet;
        for (const auto& p : points_) {
            u.push_back(p.psi_working);
            ell.push_back(p.ell_p);
            logdet.push_back(p.log_det_j_ll);
        }
        SmoothingSpline::Options opt;
        opt.lambda_multiplier = smoothing_;
        ell_spline_ = SmoothingSpline(u, ell, opt);
        if (d > 1) {
            logdet_spline_ = SmoothingSpline(u, logdet, SmoothingSpline::Options{});
            for (std::size_t k = 0; k < coords.size(); ++k) {
                std::vector<double> lam;
                for (const auto& p : points_) lam.push_back(p.lambda_hat[static_cast<Eigen::Index>(k)]);
                lambda_splines_.push_back(SmoothingSpline::interpolate(u, lam));
            }
        }
    }

    const ModelSpec& model() const { return model_; }
    const FitResult& fit() const { return fit_; }
    int psi_index() const { return psi_index_; }
    const std::string& psi_name() const { return model_.param_names[static_cast<std::size_t>(psi_index_)]; }
    Transform psi_transform() const { return psi_transform_; }
    bool scalar() const { return model_.dim() == 1; }
    const std::vector<ProfilePoint>& points() const { return points_; }
    double smoothing_multiplier() const { return smoothing_; }
    const SmoothingSpline& ell_p_spline() const { return ell_spline_; }

    double psi_hat() const { return psi_hat_; }
    double psi_hat_working() const { return psi_hat_working_; }
    double ell_hat() const { return ell_hat_; }
    double log_det_hat() const { return log_det_hat_; }
    /// j_p(psi_hat) from the partitioned information identity.
    double j_p_hat() const { return j_p_hat_; }
    /// SE(psi) = j_p(psi_hat)^{-1/2}
    double se() const { return 1.0 / std::sqrt(j_p_hat_); }
    double psi_min() const { return points_.front().psi; }
    double psi_max() const { return points_.back().psi; }

    double ell_p(double psi) const {
        if (scalar()) return model_.loglik_natural(Vector::Constant(1, psi));
        return ell_spline_(working(psi));
    }

    double ell_p_prime(double psi) const {
        if (scalar()) return natural_gradient(model_, Vector::Constant(1, psi))[0];
        const double u = working(psi);
        // d/dpsi = d/du * du/dpsi
        return ell_spline_.derivative(u) / jacobian(psi_transform_, u);
    }

    double ell_p_second(double psi) const {
        const double u = working(psi);
        const double J = jacobian(psi_transform_, u), dJ = jacobian_derivative(psi_transform_, u);
        double l1, l2;
        if (scalar()) {
            // Second derivative of the exact log-likelihood by differencing its score.
            const double h = central_step(psi, lower_bound(psi_transform_), upper_bound(psi_transform_));
            return (ell_p_prime(psi + h) - ell_p_prime(psi - h)) / (2.0 * h);
        }
        l1 = ell_spline_.derivative(u);
        l2 = ell_spline_.second_derivative(u);
        // psi = g(u): l_psi = l_u / g', l_psipsi = (l_uu - l_psi g'') / g'^2
        return (l2 - (l1 / J) * dJ) / (J * J);
    }

    double log_det_j_ll(double psi) const {
        if (scalar()) return 0.0;
        return logdet_spline_(working(psi));
    }

    /// (psi, lambda_hat_psi) on the natural scale, lambda interpolated.
    Vector theta_at(double psi) const {
        const int d = model_.dim();
        Vector t(d);
        t[psi_index_] = psi;
        if (d == 1) return t;
        const double u = working(psi);
        const auto coords = detail::nuisance_coords(d, psi_index_);
        for (std::size_t k = 0; k < coords.size(); ++k) t[coords[k]] = lambda_splines_[k](u);
        return t;
    }

    /// Same profile with extra points (e.g. from grid extension).
    ProfileCurve with_points(const std::vector<ProfilePoint>& extra, double smoothing_multiplier) const {
        auto pts = points_;
        pts.insert(pts.end(), extra.begin(), extra.end());
        return ProfileCurve(model_, psi_index_, fit_, std::move(pts), smoothing_multiplier);
    }

    ProfileCurve with_smoothing(double smoothing_multiplier) const { return with_points({}, smoothing_multiplier); }

  private:
    ModelSpec model_;
    int psi_index_ = 0;
    FitResult fit_;
    double smoothing_ = 1.0;
    Transform psi_transform_ = Transform::identity;
    double psi_hat_ = 0.0, psi_hat_working_ = 0.0, ell_hat_ = 0.0, log_det_hat_ = 0.0, j_p_hat_ = 1.0;
    std::vector<ProfilePoint> points_;
    SmoothingSpline ell_spline_, logdet_spline_;
    std::vector<SmoothingSpline> lambda_splines_;

    double working(double psi) const {
        if (!in_domain(psi_transform_, psi)) throw DomainError("psi = " + detail::fmt(psi) + " outside the parameter domain");
        return to_working(psi_transform_, psi);
    }

    ProfilePoint mle_point() const {
        ProfilePoint p;
        p.psi = psi_hat_;
        p.psi_working = psi_hat_working_;
        p.theta_psi = fit_.theta_hat;
        const auto coords = detail::nuisance_coords(model_.dim(), psi_index_);
        p.lambda_hat.resize(static_cast<Eigen::Index>(coords.size()));
        for (std::size_t k = 0; k < coords.size(); ++k) p.lambda_hat[static_cast<Eigen::Index>(k)] = fit_.theta_hat[coords[k]];
        p.ell_p = ell_hat_;
        p.log_det_j_ll = log_det_hat_;
        p.score = natural_gradient(model_, fit_.theta_hat)[psi_index_];
        p.rel_grad = fit_.rel_grad;
        return p;
    }
};

struct ProfileOptions {
    FitOptions fit;
    /// Run the sweeps left and right of psi_hat on two threads.
    bool parallel_sweeps = true;
};

namespace detail {

/// Constrained fits along `psis`, each warm-started from the previous one.
inline std::vector<ProfilePoint> sweep(const ModelSpec& model, int psi_index, const std::vector<double>& psis,
                                       Vector warm, const FitOptions& opt) {
    std::vector<ProfilePoint> out;
    out.reserve(psis.size());
    for (double psi : psis) {
        ProfilePoint p;
        try {
            p = fit_constrained(model, psi_index, psi, warm, opt);
        } catch (const NumericalError& e) {
            throw ConvergenceError(std::string("profile of '") + model.param_names[static_cast<std::size_t>(psi_index)] +
                                   "' at psi = " + fmt(psi) + ": " + e.what());
        }
        warm = p.lambda_hat;
        out.push_back(std::move(p));
    }
    return out;
}

inline Vector nuisance_of(const Vector& theta, int psi_index) {
    Vector v(theta.size() - 1);
    for (Eigen::Index i = 0, k = 0; i < theta.size(); ++i)
        if (i != psi_index) v[k++] = theta[i];
    return v;
}

}  // namespace detail

/// Profiles coordinate `psi_index` on `grid` (natural scale, strictly
/// increasing). Fits sweep outward from psi_hat in both directions.
inline ProfileCurve build_profile(const ModelSpec& model, const FitResult& fit, int psi_index,
                                  const std::vector<double>& grid, const ProfileOptions& opt = {}) {
    if (psi_index < 0 || psi_index >= model.dim()) throw ValidationError("psi index out of range");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ValidationError("profile grid must be strictly increasing");
    const double psi_hat = fit.theta_hat[psi_index];
    std::vector<double> left, right;
    for (double p : grid) (p < psi_hat ? left : right).push_back(p);
    std::reverse(left.begin(), left.end());
    const Vector warm = detail::nuisance_of(fit.theta_hat, psi_index);

    std::vector<ProfilePoint> lp, rp;
    if (opt.parallel_sweeps && !left.empty() && !right.empty()) {
        auto fut = std::async(std::launch::async, [&] { return detail::sweep(model, psi_index, left, warm, opt.fit); });
        rp = detail::sweep(model, psi_index, right, warm, opt.fit);
        lp = fut.get();
    } else {
        lp = detail::sweep(model, psi_index, left, warm, opt.fit);
        rp = detail::sweep(model, psi_index, right, warm, opt.fit);
    }
    lp.insert(lp.end(), rp.begin(), rp.end());
    return ProfileCurve(model, psi_index, fit, std::move(lp));
}

inline ProfileCurve build_profile(const ModelSpec& model, int psi_index, const std::vector<double>& grid,
                                  const ProfileOptions& opt = {}) {
    return build_profile(model, fit_mle(model, opt.fit), psi_index, grid, opt);
}

}  // namespace hota
