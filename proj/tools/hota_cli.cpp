// hota: command-line front end for tail-area posterior sampling.
//
//   hota sample  --model linkage --param theta --prior flat --T 100000 --seed 1
//   hota compare --model censreg --param tau --method hota --method-b mh
//   hota curve   --model logistic --param beta6 --prior matching --out curve.csv

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hota/hota.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct RunConfig {
    std::string model = "linkage";
    std::string data;  // empty: the model's built-in fixture
    std::string param;
    std::string prior = "flat";
    std::string method = "hota";
    long long T = 100000;
    std::uint64_t seed = 42;
    int n_grid = 50;
    double half_width = 4.0;
    double delta = 0.25;
    std::size_t synthetic_n = 0;
    std::size_t mh_thin = 10;
    std::size_t mh_burn_in = 5000;
    unsigned threads = 0;
    std::string samples_out;
    std::string summary_out;
    std::string out;  // compare JSON or curve CSV
    std::string overlay_out;
};

json to_json(const RunConfig& c) {
    return {{"model", c.model},       {"data", c.data},         {"param", c.param},
            {"prior", c.prior},       {"method", c.method},     {"T", c.T},
            {"seed", c.seed},         {"n_grid", c.n_grid},     {"half_width", c.half_width},
            {"delta", c.delta},       {"synthetic_n", c.synthetic_n}, {"mh_thin", c.mh_thin},
            {"mh_burn_in", c.mh_burn_in}};
}

std::string fixture_dir() {
    if (const char* env = std::getenv("HOTA_FIXTURE_DIR")) return env;
    return HOTA_FIXTURE_DIR;
}

std::string resolve_fixture(const std::string& file) {
    const fs::path p = fs::path(fixture_dir()) / file;
    if (!fs::exists(p))
        throw hota::ValidationError("built-in fixture '" + file + "' not found in " + fixture_dir() +
                                    " (set HOTA_FIXTURE_DIR or pass --data <path>)");
    return p.string();
}

// Builds the model; the returned spec owns its data.
hota::ModelSpec load_model(RunConfig& c) {
    const bool synthetic = c.data == "synthetic";
    if (c.model == "linkage") {
        if (c.data.empty()) c.data = "linkage-ref";
        if (synthetic) throw hota::ValidationError("the linkage model has no synthetic data generator");
        if (c.data == "linkage-ref") return hota::make_linkage_model(hota::reference_linkage_data());
        return hota::make_linkage_model(hota::load_linkage(c.data));
    }
    if (c.model == "censreg") {
        if (c.data.empty()) c.data = "motorette";
        if (synthetic)
            return hota::make_censreg_model(hota::synthetic_censreg(c.synthetic_n ? c.synthetic_n : 40, 0.3, c.seed));
        const std::string path = c.data == "motorette" ? resolve_fixture("motorette.csv") : c.data;
        return hota::make_censreg_model(hota::load_censreg(path));
    }
    if (c.model == "logistic") {
        if (c.data.empty()) c.data = "urine";
        if (synthetic)
            return hota::make_logistic_model(hota::synthetic_logistic(c.synthetic_n ? c.synthetic_n : 200, c.seed));
        const std::string path = c.data == "urine" ? resolve_fixture("urine.csv") : c.data;
        return hota::make_logistic_model(hota::load_logistic(path));
    }
    throw hota::ValidationError("unknown model '" + c.model + "' (expected linkage, censreg, logistic)");
}

struct Prepared {
    hota::ModelSpec model;
    int index = 0;
    hota::PriorSpec prior;
    hota::GridPolicy policy;
};

Prepared prepare(RunConfig& c) {
    if (c.T < 1) throw hota::ValidationError("--T must be >= 1");
    if (c.method != "hota" && c.method != "mh" && c.method != "exact")
        throw hota::ValidationError("unknown method '" + c.method + "' (expected hota, mh, exact)");
    if (c.method == "exact" && c.model != "linkage")
        throw hota::ValidationError("--method exact is only available for the linkage model");
    Prepared p{load_model(c), 0, hota::parse_prior(c.prior), {}};
    if (c.param.empty()) c.param = p.model.param_names.back();
    p.index = p.model.index_of(c.param);
    c.param = p.model.param_names[static_cast<std::size_t>(p.index)];
    p.policy.n_grid = c.n_grid;
    p.policy.half_width = c.half_width;
    p.policy.delta = c.delta;
    p.policy.validate();
    if (c.method == "mh" && p.prior.kind == hota::PriorKind::matching)
        throw hota::ValidationError("MH is not available with the matching prior");
    if (c.method == "exact" && p.prior.kind != hota::PriorKind::flat)
        throw hota::ValidationError("the exact linkage posterior is defined for the flat prior only");
    return p;
}

struct Run {
    std::vector<double> draws;
    double ms = 0.0;
    std::string warning;
};

unsigned thread_count(const RunConfig& c) {
    return c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
}

Run run_method(RunConfig& c, const Prepared& p) {
    const auto t0 = std::chrono::steady_clock::now();
    Run r;
    const auto T = static_cast<std::size_t>(c.T);
    if (c.method == "hota") {
        const auto curve = hota::build_rstar_curve(p.model, p.index, p.prior, p.policy);
        auto s = hota::hota_sample(curve, T, c.seed, thread_count(c));
        r.draws = std::move(s.draws);
        r.warning = s.warning;
    } else if (c.method == "mh") {
        auto cfg = hota::MHConfig::for_draws(T, c.mh_thin, c.seed, c.mh_burn_in);
        const auto res = hota::mh_sample(p.model, p.prior, cfg);
        r.draws = res.column(p.index);
    } else {
        const auto& data = std::get<hota::LinkageData>(*p.model.data);
        r.draws = hota::exact_linkage_sample(T, c.seed, data).draws;
    }
    r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!r.warning.empty()) std::cerr << "warning: " << r.warning << "\n";
    return r;
}

json summary_json(const RunConfig& c, const hota::SummaryReport& s) {
    return {{"param", c.param},   {"prior", c.prior}, {"method", c.method}, {"mean", s.mean},
            {"sd", s.sd},         {"q025", s.q025},   {"median", s.median}, {"q975", s.q975},
            {"hpd", {s.hpd.first, s.hpd.second}},     {"T", s.T},           {"seed", c.seed},
            {"config", to_json(c)}};
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw hota::ValidationError("cannot write '" + path + "'");
    out.precision(15);
    return out;
}

void write_sidecar(const std::string& csv_path, const json& config) {
    open_out(csv_path + ".config.json") << config.dump(2) << "\n";
}

void write_samples(const std::string& path, const std::vector<double>& draws, const json& config) {
    auto out = open_out(path);
    out << "psi\n";
    for (double v : draws) out << v << "\n";
    write_sidecar(path, config);
}

int cmd_sample(RunConfig& c) {
    const Prepared p = prepare(c);
    const Run r = run_method(c, p);
    std::cout << "sampling time: " << r.ms << " ms\n";
    const auto s = hota::summarize(r.draws);
    const json j = summary_json(c, s);
    if (!c.samples_out.empty()) write_samples(c.samples_out, r.draws, to_json(c));
    if (!c.summary_out.empty()) open_out(c.summary_out) << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_compare(RunConfig& a, RunConfig& b) {
    if (a.model != b.model || a.param != b.param || a.data != b.data)
        throw hota::ValidationError("compare needs the same model, data and param for both runs");
    const Prepared pa = prepare(a);
    const Prepared pb = prepare(b);
    if (pa.index != pb.index) throw hota::ValidationError("compare: runs resolve to different parameters");
    const Run ra = run_method(a, pa);
    const Run rb = run_method(b, pb);
    const double ks = hota::ks_distance(ra.draws, rb.draws);
    double hota_ms = 0.0, mh_ms = 0.0;
    (a.method == "mh" ? mh_ms : hota_ms) += a.method == "exact" ? 0.0 : ra.ms;
    (b.method == "mh" ? mh_ms : hota_ms) += b.method == "exact" ? 0.0 : rb.ms;
    json j = {{"runs", {summary_json(a, hota::summarize(ra.draws)), summary_json(b, hota::summarize(rb.draws))}},
              {"ks_distance", ks},
              {"timing", {{"hota_ms", hota_ms}, {"mh_ms", mh_ms}}}};
    std::cout << "run A time: " << ra.ms << " ms, run B time: " << rb.ms << " ms\n";
    if (!a.out.empty()) open_out(a.out) << j.dump(2) << "\n";
    if (!a.overlay_out.empty()) {
        const auto ea = hota::kde(ra.draws), eb = hota::kde(rb.draws);
        const double lo = std::min(ea.grid.front(), eb.grid.front());
        const double hi = std::max(ea.grid.back(), eb.grid.back());
        std::vector<double> grid(512);
        for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = lo + (hi - lo) * i / (grid.size() - 1);
        const auto da = hota::kde_at(ra.draws, grid, ea.bandwidth), db = hota::kde_at(rb.draws, grid, eb.bandwidth);
        auto out = open_out(a.overlay_out);
        out << "psi,density_a,density_b\n";
        for (std::size_t i = 0; i < grid.size(); ++i) out << grid[i] << "," << da[i] << "," << db[i] << "\n";
        write_sidecar(a.overlay_out, json{{"run_a", to_json(a)}, {"run_b", to_json(b)}});
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_curve(RunConfig& c) {
    if (c.method != "hota") throw hota::ValidationError("curve requires --method hota");
    const Prepared p = prepare(c);
    const auto curve = hota::build_rstar_curve(p.model, p.index, p.prior, p.policy);
    const auto& prof = *curve.profile;
    const bool has_density = p.prior.kind != hota::PriorKind::matching;
    // Normalizing constant of the Laplace density from a dense grid.
    double log_norm = 0.0;
    if (has_density) {
        const int m = 4001;
        std::vector<double> psi(m);
        const double ulo = to_working(prof.psi_transform(), prof.psi_min());
        const double uhi = to_working(prof.psi_transform(), prof.psi_max());
        for (int i = 0; i < m; ++i) psi[static_cast<std::size_t>(i)] = to_natural(prof.psi_transform(), ulo + (uhi - ulo) * i / (m - 1));
        std::vector<double> lk(m);
        for (int i = 0; i < m; ++i) lk[static_cast<std::size_t>(i)] = hota::laplace_log_kernel(psi[static_cast<std::size_t>(i)], prof, p.prior);
        const double top = *std::max_element(lk.begin(), lk.end());
        std::vector<double> k(m);
        for (int i = 0; i < m; ++i) k[static_cast<std::size_t>(i)] = std::exp(lk[static_cast<std::size_t>(i)] - top);
        log_norm = top + std::log(hota::trapezoid(psi, k));
    }
    const std::string path = c.out.empty() ? "curve.csv" : c.out;
    auto out = open_out(path);
    out << "psi,ell_p,r_p,q_b,r_star,tail_prob,laplace_density\n";
    for (std::size_t i = 0; i < curve.psi_grid.size(); ++i) {
        const double psi = curve.psi_grid[i], rs = curve.r_star[i];
        const double tail = curve.decreasing ? hota::normal::cdf(-rs) : hota::normal::cdf(rs);
        out << psi << "," << prof.ell_p(psi) << "," << curve.r_p[i] << "," << curve.q_b[i] << "," << rs << "," << tail << ",";
        if (has_density) out << std::exp(hota::laplace_log_kernel(psi, prof, p.prior) - log_norm);
        else out << "nan";
        out << "\n";
    }
    write_sidecar(path, to_json(c));
    std::cout << "curve: " << curve.psi_grid.size() << " points, r* in [" << curve.r_star_min() << ", "
              << curve.r_star_max() << "], " << curve.extension_points << " extension points -> " << path << "\n";
    return 0;
}

void add_common(CLI::App* sub, RunConfig& c) {
    sub->add_option("--model", c.model, "linkage | censreg | logistic")->capture_default_str();
    sub->add_option("--data", c.data, "fixture name (linkage-ref, motorette, urine), synthetic, or a CSV path");
    sub->add_option("--param", c.param, "name or index of the parameter of interest");
    sub->add_option("--prior", c.prior, "flat | normal:k=<k>[,mu0=<m>] | matching")->capture_default_str();
    sub->add_option("--method", c.method, "hota | mh | exact")->capture_default_str();
    sub->add_option("--T", c.T, "number of draws")->capture_default_str();
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--n-grid", c.n_grid, "grid points")->capture_default_str();
    sub->add_option("--half-width", c.half_width, "grid half width in SE units")->capture_default_str();
    sub->add_option("--delta", c.delta, "excluded band around the MLE in SE units")->capture_default_str();
    sub->add_option("--synthetic-n", c.synthetic_n, "rows of synthetic data");
    sub->add_option("--mh-thin", c.mh_thin, "MH thinning")->capture_default_str();
    sub->add_option("--mh-burn-in", c.mh_burn_in, "MH burn-in iterations")->capture_default_str();
    sub->add_option("--threads", c.threads, "sampling threads (0: all cores)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tail-area approximations for marginal posterior sampling"};
    app.require_subcommand(1);
    RunConfig cs, cc, cb, cv;
    std::string method_b, prior_b;

    auto* sample = app.add_subcommand("sample", "draw from one marginal posterior");
    add_common(sample, cs);
    sample->add_option("--samples", cs.samples_out, "samples CSV path");
    sample->add_option("--summary", cs.summary_out, "summary JSON path");

    auto* compare = app.add_subcommand("compare", "compare two methods or two priors");
    add_common(compare, cc);
    compare->add_option("--method-b", method_b, "method of the second run (default: --method)");
    compare->add_option("--prior-b", prior_b, "prior of the second run (default: --prior)");
    compare->add_option("--out", cc.out, "comparison JSON path");
    compare->add_option("--overlay", cc.overlay_out, "KDE overlay CSV path");

    auto* curve = app.add_subcommand("curve", "dump the r* diagnostic grid");
    add_common(curve, cv);
    curve->add_option("--out", cv.out, "curve CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sample) return cmd_sample(cs);
        if (*compare) {
            cb = cc;
            if (!method_b.empty()) cb.method = method_b;
            if (!prior_b.empty()) cb.prior = prior_b;
            return cmd_compare(cc, cb);
        }
        if (*curve) return cmd_curve(cv);
    } catch (const hota::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
