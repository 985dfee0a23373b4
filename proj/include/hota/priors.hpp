#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "hota/errors.hpp"

namespace hota {

enum class PriorKind { flat, diag_normal, matching };

/// Prior on the full natural-scale parameter vector.
///
/// diag_normal is N(mu0, k I). mu0 holds either d entries or a single value
/// broadcast to every coordinate. matching is the scalar matching prior,
/// which only enters through its closed-form q_B.
struct PriorSpec {
    PriorKind kind = PriorKind::flat;
    double k = std::numeric_limits<double>::infinity();
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(1);

    static PriorSpec flat() { return {}; }

    static PriorSpec normal(double k, double mu0 = 0.0) {
        if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("normal prior requires finite k > 0");
        PriorSpec p;
        p.kind = PriorKind::diag_normal;
        p.k = k;
        p.mu0 = Eigen::VectorXd::Constant(1, mu0);
        return p;
    }

    static PriorSpec matching() {
        PriorSpec p;
        p.kind = PriorKind::matching;
        return p;
    }

    double mean(Eigen::Index i) const { return mu0.size() == 1 ? mu0[0] : mu0[i]; }

    std::string to_string() const {
        switch (kind) {
            case PriorKind::flat: return "flat";
            case PriorKind::matching: return "matching";
            case PriorKind::diag_normal: {
                std::ostringstream os;
                os.precision(12);
                os << "normal:k=" << k;
                if (mu0.size() == 1) {
                    if (mu0[0] != 0.0) os << ",mu0=" << mu0[0];
                } else {
                    os << ",mu0=";
                    for (Eigen::Index i = 0; i < mu0.size(); ++i) os << (i ? ";" : "") << mu0[i];
                }
                return os.str();
            }
        }
        return "?";
    }
};

/// Parses `flat`, `matching`, `normal:k=35` or `normal:k=35,mu0=0`
/// (mu0 may also be a ';'-separated list with one entry per parameter).
inline PriorSpec parse_prior(const std::string& text) {
    if (text == "flat") return PriorSpec::flat();
    if (text == "matching") return PriorSpec::matching();
    const std::string head = "normal:";
    if (text.rfind(head, 0) != 0 && text != "normal")
        throw ValidationError("unknown prior '" + text + "' (expected flat, normal:k=<k>[,mu0=<m>], matching)");
    double k = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> mu0{0.0};
    std::stringstream rest(text.size() > head.size() ? text.substr(head.size()) : std::string());
    std::string item;
    auto number = [&](const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || *end != '\0') throw ValidationError("bad number '" + s + "' in prior '" + text + "'");
        return v;
    };
    while (std::getline(rest, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ValidationError("bad prior option '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (key == "k") {
            k = number(value);
        } else if (key == "mu0") {
            mu0.clear();
            std::stringstream vs(value);
            std::string v;
            while (std::getline(vs, v, ';')) mu0.push_back(number(v));
            if (mu0.empty()) throw ValidationError("empty mu0 in prior '" + text + "'");
        } else {
            throw ValidationError("unknown prior option '" + key + "'");
        }
    }
    if (std::isnan(k)) throw ValidationError("normal prior requires k=<value>");
    PriorSpec p = PriorSpec::normal(k);
    p.mu0 = Eigen::Map<const Eigen::VectorXd>(mu0.data(), static_cast<Eigen::Index>(mu0.size()));
    return p;
}

/// log pi(theta) up to an additive constant.
inline double log_prior_density(const PriorSpec& prior, const Eigen::VectorXd& theta) {
    switch (prior.kind) {
        case PriorKind::flat: return 0.0;
        case PriorKind::diag_normal: {
            if (prior.mu0.size() != 1 && prior.mu0.size() != theta.size())
                throw ValidationError("mu0 has " + std::to_string(prior.mu0.size()) + " entries, model has " +
                                      std::to_string(theta.size()));
            double s = 0.0;
            for (Eigen::Index i = 0; i < theta.size(); ++i) s += std::pow(theta[i] - prior.mean(i), 2);
            return -0.5 * s / prior.k;
        }
        case PriorKind::matching:
            throw ValidationError("the matching prior has no joint density over all parameters");
    }
    return 0.0;
}

/// log{ pi(theta_hat) / pi(theta_psi) }, both on the natural scale.
inline double log_prior_ratio(const PriorSpec& prior, const Eigen::VectorXd& theta_hat,
                              const Eigen::VectorXd& theta_psi) {
    if (prior.kind == PriorKind::matching)
        throw ValidationError("log_prior_ratio is not defined for the matching prior");
    return log_prior_density(prior, theta_hat) - log_prior_density(prior, theta_psi);
}

}  // namespace hota
