// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hota/hota.hpp"

using namespace hota;
using clk = std::chrono::steady_clock;

namespace {

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

struct Check {
    bool ok = true;
    std::ostringstream log;

    void near(const std::string& what, double got, double want, double tol) {
        const bool pass = std::abs(got - want) <= tol;
        ok = ok && pass;
        log << " " << what << "=" << got << (pass ? "" : "(!)") << " [" << want << "+-" << tol << "]";
    }
    void below(const std::string& what, double got, double limit) {
        const bool pass = got <= limit;
        ok = ok && pass;
        log << " " << what << "=" << got << (pass ? "" : "(!)") << " [<=" << limit << "]";
    }
    void truth(const std::string& what, bool pass) {
        ok = ok && pass;
        log << " " << what << "=" << (pass ? "yes" : "no(!)");
    }
    void note(const std::string& s) { log << " " << s; }
};

int failures = 0;

void report(int n, const std::string& title, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.log << " exception: " << e.what();
    }
    if (!c.ok) ++failures;
    std::cout << "criterion " << n << " " << (c.ok ? "PASS" : "FAIL") << " - " << title << ":" << c.log.str() << std::endl;
}

bool fixture(const std::string& name) { return std::filesystem::exists(std::string(HOTA_FIXTURE_DIR) + "/" + name); }

std::vector<double> column(const MHResult& r, int j) { return r.column(j); }

}  // namespace

int main() {
    std::cout.precision(4);
    const LinkageData linkage = reference_linkage_data();

    report(1, "linkage exact posterior by quadrature", [&](Check& c) {
        const auto t0 = clk::now();
        const ExactLinkagePosterior post(linkage);
        c.near("mean", post.mean(), 0.831, 0.002);
        c.near("sd", post.sd(), 0.108, 0.002);
        c.near("q025", post.quantile(0.025), 0.57, 0.002);
        c.near("median", post.quantile(0.5), 0.852, 0.002);
        c.near("q975", post.quantile(0.975), 0.978, 0.002);
        c.below("seconds", seconds_since(t0), 1.0);
    });

    report(2, "linkage HOTA, T=1e5", [&](Check& c) {
        const auto t0 = clk::now();
        const auto model = make_linkage_model(linkage);
        const auto curve = build_rstar_curve(model, 0, PriorSpec::flat());
        const auto s = summarize(hota_sample(curve, 100000, 1).draws);
        const double secs = seconds_since(t0);
        c.near("mean", s.mean, 0.827, 0.01);
        c.near("sd", s.sd, 0.109, 0.01);
        c.near("q025", s.q025, 0.563, 0.01);
        c.near("median", s.median, 0.848, 0.01);
        c.near("q975", s.q975, 0.976, 0.01);
        c.near("hpd_lo", s.hpd.first, 0.617, 0.01);
        c.near("hpd_hi", s.hpd.second, 0.994, 0.01);
        c.below("seconds", secs, 2.0);
    });

    report(3, "censored regression, HOTA vs Table 2 and vs MH", [&](Check& c) {
        const bool have = fixture("motorette.csv");
        const auto data = have ? load_censreg(std::string(HOTA_FIXTURE_DIR) + "/motorette.csv") : synthetic_censreg(40, 0.3, 11);
        c.note(have ? "[motorette fixture]" : "[fixture absent: synthetic n=40, 30% censored]");
        const auto model = make_censreg_model(data);
        const auto fit = fit_mle(model);
        auto cfg = MHConfig::for_draws(100000, 10, 5);
        const auto mh = mh_sample(model, PriorSpec::flat(), cfg, &fit);
        const double want_mean[] = {-6.191, 4.401, -1.24};
        const double want_sd[] = {1.128, 0.521, 0.202};
        for (int i = 0; i < 3; ++i) {
            const auto curve = build_rstar_curve(model, i, PriorSpec::flat());
            const auto draws = hota_sample(curve, 100000, 1).draws;
            const auto s = summarize(draws);
            const std::string name = model.param_names[static_cast<std::size_t>(i)];
            if (have) {
                c.near(name + ".mean", s.mean, want_mean[i], 0.05);
                c.near(name + ".sd", s.sd, want_sd[i], 0.05);
            }
            c.below(name + ".ks_mh", ks_distance(draws, column(mh, i)), 0.02);
        }
    });

    report(4, "logistic regression, Tables 3-4", [&](Check& c) {
        if (!fixture("urine.csv")) {
            c.note("[fixture absent: synthetic n=200]");
            const auto model = make_logistic_model(synthetic_logistic(200, 3));
            const auto fit = fit_mle(model);
            const auto mh = mh_sample(model, PriorSpec::flat(), MHConfig::for_draws(100000, 10, 5), &fit);
            const auto draws = hota_sample(build_rstar_curve(model, 6, PriorSpec::flat()), 100000, 1).draws;
            c.below("beta6.ks_mh", ks_distance(draws, column(mh, 6)), 0.02);
            double prev = 0.0;
            for (const char* p : {"normal:k=10", "normal:k=35", "normal:k=100", "flat"}) {
                const double sd = summarize(hota_sample(build_rstar_curve(model, 6, parse_prior(p)), 100000, 1).draws).sd;
                c.truth(std::string("sd_increasing@") + p, sd >= prev);
                prev = sd;
            }
            return;
        }
        const auto model = make_logistic_model(load_logistic(std::string(HOTA_FIXTURE_DIR) + "/urine.csv"));
        const auto flat = summarize(hota_sample(build_rstar_curve(model, 6, PriorSpec::flat()), 100000, 1).draws);
        c.near("flat.mean", flat.mean, 0.926, 0.05);
        c.near("flat.hpd_lo", flat.hpd.first, 0.429, 0.05);
        c.near("flat.hpd_hi", flat.hpd.second, 1.459, 0.05);
        std::vector<double> sds;
        for (const char* p : {"normal:k=10", "normal:k=35", "normal:k=100"})
            sds.push_back(summarize(hota_sample(build_rstar_curve(model, 6, parse_prior(p)), 100000, 1).draws).sd);
        sds.push_back(flat.sd);
        c.note("sd(k=10,35,100,flat)=(" + std::to_string(sds[0]) + "," + std::to_string(sds[1]) + "," +
               std::to_string(sds[2]) + "," + std::to_string(sds[3]) + ")");
        c.truth("sd_monotone", sds[0] < sds[1] && sds[1] < sds[2] && sds[2] < sds[3]);
        const auto match = summarize(hota_sample(build_rstar_curve(model, 6, PriorSpec::matching()), 100000, 1).draws);
        c.near("matching.mean", match.mean, 0.862, 0.05);
        c.near("matching.sd", match.sd, 0.257, 0.05);
    });

    report(5, "timing: HOTA for all 7 logistic marginals vs MH", [&](Check& c) {
        const bool have = fixture("urine.csv");
        const auto model = have ? make_logistic_model(load_logistic(std::string(HOTA_FIXTURE_DIR) + "/urine.csv"))
                                : make_logistic_model(synthetic_logistic(200, 3));
        if (!have) c.note("[fixture absent: synthetic n=200]");
        const auto t0 = clk::now();
        for (int i = 0; i < 7; ++i) {
            const auto curve = build_rstar_curve(model, i, PriorSpec::flat());
            (void)hota_sample(curve, 100000, 1);
        }
        const double hota_s = seconds_since(t0);
        const auto t1 = clk::now();
        const auto mh = mh_sample(model, PriorSpec::flat(), MHConfig::for_draws(100000, 10, 5));
        const double mh_s = seconds_since(t1);
        c.note("hota_s=" + std::to_string(hota_s) + " mh_s=" + std::to_string(mh_s) +
               " retained=" + std::to_string(mh.draws.rows()));
        c.truth("ratio>=10 (" + std::to_string(mh_s / hota_s) + ")", mh_s >= 10.0 * hota_s);
    });

    report(6, "property suite on synthetic data", [&](Check& c) {
        struct Case {
            std::string label;
            ModelSpec model;
        };
        std::vector<Case> cases;
        cases.push_back({"linkage", make_linkage_model(synthetic_linkage(200, 0.6, 21))});
        cases.push_back({"censreg", make_censreg_model(synthetic_censreg(40, 0.3, 22))});
        cases.push_back({"logistic", make_logistic_model(synthetic_logistic(200, 23))});
        double worst_ecdf = 0.0, worst_round = 0.0;
        for (const auto& cs : cases) {
            for (int i = 0; i < cs.model.dim(); ++i) {
                const auto curve = build_rstar_curve(cs.model, i, PriorSpec::flat());
                const auto draws = hota_sample(curve, 100000, 7).draws;
                // (a) ECDF against the curve's tail probabilities.
                const double lo = curve.psi_low(), hi = curve.psi_high();
                const double band = curve.policy.delta * curve.profile->se();
                std::vector<double> pts;
                for (int k = 1; k < 200; ++k) {
                    const double p = lo + (hi - lo) * k / 200.0;
                    if (std::abs(p - curve.profile->psi_hat()) > band) pts.push_back(p);
                }
                worst_ecdf = std::max(worst_ecdf, ecdf_distance_at(draws, pts, [&](double p) { return curve.tail_probability(p); }));
                // (b) round trip through the smoothed inverse.
                for (int k = 0; k <= 400; ++k) {
                    const double z = curve.r_star_min() + (curve.r_star_max() - curve.r_star_min()) * k / 400.0;
                    const double psi = curve.inverse(z);
                    if (std::abs(psi - curve.profile->psi_hat()) <= band) continue;
                    worst_round = std::max(worst_round, std::abs(r_star_b(psi, *curve.profile, PriorSpec::flat()) - z));
                }
            }
        }
        c.below("(a)ecdf_sup", worst_ecdf, 0.01);
        c.below("(b)roundtrip", worst_round, 1e-3);

        // (c) determinism, including across thread counts.
        const auto model = cases[1].model;
        const auto curve = build_rstar_curve(model, 2, PriorSpec::flat());
        const auto a = hota_sample(curve, 100000, 99, 1).draws;
        const auto b = hota_sample(curve, 100000, 99, 1).draws;
        const auto t4 = hota_sample(curve, 100000, 99, 4).draws;
        c.truth("(c)bit_exact", a == b && a == t4);

        // (d) two priors, one seed: same normal stream, so the draws share ranks.
        const auto lmodel = cases[2].model;
        const auto c1 = build_rstar_curve(lmodel, 6, PriorSpec::flat());
        const auto c2 = build_rstar_curve(lmodel, 6, PriorSpec::normal(10.0));
        const auto z = standard_normal_stream(50000, 5);
        const auto d1 = hota_sample(c1, 50000, 5).draws, d2 = hota_sample(c2, 50000, 5).draws;
        bool same = hota_sample_from_normals(c1, z).draws == d1 && hota_sample_from_normals(c2, z).draws == d2;
        for (std::size_t k = 1; k < z.size() && same; ++k)
            same = ((z[k] > z[k - 1]) == (d1[k] < d1[k - 1])) && ((d1[k] < d1[k - 1]) == (d2[k] < d2[k - 1]));
        c.truth("(d)shared_z", same);

        // (e) analytic scores against a 7-point stencil.
        double worst_grad = 0.0;
        std::mt19937_64 eng(17);
        for (const auto& cs : cases) {
            const auto fit = fit_mle(cs.model);
            for (int k = 0; k < 100; ++k) {
                Vector u = fit.theta_hat_working;
                for (Eigen::Index j = 0; j < u.size(); ++j) u[j] += 0.5 * fit.se[j] / jacobian(cs.model.transforms[j], u[j]) * standard_normal(eng);
                const Vector th = cs.model.to_natural(u);
                const Vector g = cs.model.gradient(th);
                const Vector ref = stencil7_gradient([&](const Vector& t) { return cs.model.loglik_natural(t); }, th);
                for (Eigen::Index j = 0; j < g.size(); ++j)
                    worst_grad = std::max(worst_grad, std::abs(g[j] - ref[j]) / std::max(1.0, std::abs(ref[j])));
            }
        }
        c.below("(e)grad_rel", worst_grad, 1e-5);

        // (f) d = 1: HOTA tail probabilities against the exact CDF, on the
        // synthetic linkage counts used above. The 20-count fixture is
        // printed too; at that size the approximation itself is off by ~0.016.
        auto cdf_gap = [](const LinkageData& d) {
            const auto lcurve = build_rstar_curve(make_linkage_model(d), 0, PriorSpec::flat());
            const ExactLinkagePosterior post(d);
            double worst = 0.0;
            const double band = lcurve.policy.delta * lcurve.profile->se();
            for (int k = 1; k < 400; ++k) {
                const double p = lcurve.psi_low() + (lcurve.psi_high() - lcurve.psi_low()) * k / 400.0;
                if (std::abs(p - lcurve.profile->psi_hat()) <= band) continue;
                worst = std::max(worst, std::abs(lcurve.tail_probability(p) - post.cdf(p)));
            }
            return worst;
        };
        const double worst_cdf = cdf_gap(synthetic_linkage(200, 0.6, 21));
        c.note("(info)cdf_sup_n20=" + std::to_string(cdf_gap(linkage)));
        c.below("(f)cdf_sup", worst_cdf, 0.01);
    });

    std::cout << (failures ? "acceptance: " + std::to_string(failures) + " criteria failed" : std::string("acceptance: all criteria passed"))
              << std::endl;
    return failures ? 1 : 0;
}
