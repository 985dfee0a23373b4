#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include "json.hpp"

#include "hota/hota.hpp"
#include "test_util.hpp"

using json = nlohmann::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(HOTA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    return json::parse(in);
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> raw;
};

Csv read_csv(const std::string& path) {
    std::ifstream in(path);
    Csv c;
    std::string line;
    std::getline(in, line);
    std::stringstream hs(line);
    for (std::string f; std::getline(hs, f, ',');) c.header.push_back(f);
    while (std::getline(in, line)) {
        c.raw.push_back(line);
        std::stringstream ls(line);
        std::vector<double> row;
        for (std::string f; std::getline(ls, f, ',');) row.push_back(f == "nan" ? NAN : std::stod(f));
        c.rows.push_back(row);
    }
    return c;
}

}  // namespace

TEST(Cli, SampleLinkageTableOne) {
    const auto dir = testutil::scratch_dir();
    const auto csv = (dir / "s.csv").string(), sum = (dir / "s.json").string();
    ASSERT_EQ(run("sample --model linkage --prior flat --param theta --T 100000 --seed 1 --samples " + csv + " --summary " + sum), 0);
    const auto j = read_json(sum);
    EXPECT_NEAR(j["mean"].get<double>(), 0.827, 0.01);
    EXPECT_NEAR(j["sd"].get<double>(), 0.109, 0.01);
    EXPECT_NEAR(j["q025"].get<double>(), 0.563, 0.01);
    EXPECT_NEAR(j["median"].get<double>(), 0.848, 0.01);
    EXPECT_NEAR(j["q975"].get<double>(), 0.976, 0.01);
    EXPECT_NEAR(j["hpd"][0].get<double>(), 0.617, 0.01);
    EXPECT_NEAR(j["hpd"][1].get<double>(), 0.994, 0.01);
    EXPECT_EQ(j["T"].get<int>(), 100000);
    EXPECT_EQ(j["seed"].get<int>(), 1);
    EXPECT_EQ(j["param"], "theta");
    EXPECT_EQ(j["prior"], "flat");
    EXPECT_EQ(j["method"], "hota");

    const auto c = read_csv(csv);
    ASSERT_EQ(c.header, std::vector<std::string>{"psi"});
    ASSERT_EQ(c.rows.size(), 100000u);
    // at least 12 significant digits
    std::string digits;
    for (char ch : c.raw[0])
        if (std::isdigit(static_cast<unsigned char>(ch))) digits += ch;
    EXPECT_GE(digits.size() - digits.find_first_not_of('0'), 12u);
}

TEST(Cli, OutputsEmbedConfig) {
    const auto dir = testutil::scratch_dir();
    const auto csv = (dir / "s.csv").string(), sum = (dir / "s.json").string();
    ASSERT_EQ(run("sample --model censreg --data synthetic --T 2000 --seed 5 --n-grid 40 --samples " + csv + " --summary " + sum), 0);
    const auto side = read_json(csv + ".config.json");
    const auto j = read_json(sum);
    for (const auto& cfg : {side, j["config"]}) {
        EXPECT_EQ(cfg["model"], "censreg");
        EXPECT_EQ(cfg["data"], "synthetic");
        EXPECT_EQ(cfg["param"], "tau");
        EXPECT_EQ(cfg["T"].get<int>(), 2000);
        EXPECT_EQ(cfg["seed"].get<int>(), 5);
        EXPECT_EQ(cfg["n_grid"].get<int>(), 40);
    }
    // rerunning from the recorded config reproduces the draws
    const auto csv2 = (dir / "s2.csv").string();
    const auto cfg = side;
    std::ostringstream args;
    args << "sample --model " << cfg["model"].get<std::string>() << " --data " << cfg["data"].get<std::string>()
         << " --param " << cfg["param"].get<std::string>() << " --T " << cfg["T"] << " --seed " << cfg["seed"]
         << " --n-grid " << cfg["n_grid"] << " --samples " << csv2;
    ASSERT_EQ(run(args.str()), 0);
    EXPECT_EQ(read_csv(csv).raw, read_csv(csv2).raw);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("sample --model logistic --data synthetic --method exact"), 2);
    EXPECT_EQ(run("sample --model linkage --T 0"), 2);
    EXPECT_EQ(run("sample --model nosuch"), 2);
    EXPECT_EQ(run("sample --model linkage --prior normal:k=-3"), 2);
    EXPECT_EQ(run("sample --model linkage --prior matching"), 2);
    EXPECT_EQ(run("sample --model censreg --data synthetic --param sigma"), 2);
    EXPECT_EQ(run("sample --model censreg --data /nonexistent.csv"), 2);
    EXPECT_EQ(run("sample --bogus-flag 1"), 2);
    EXPECT_EQ(run("frobnicate"), 2);

    const auto dir = testutil::scratch_dir();
    const auto bad = testutil::write_file(dir / "bad.csv", "time,x,censored\n3.1,2.0,0\n3.3,abc,1\n");
    EXPECT_EQ(run("sample --model censreg --data " + bad), 2);

    // perfectly separated responses: no finite MLE
    std::ostringstream sep;
    sep << "gravity,ph,osmo,conduct,urea,calc,y\n";
    const auto X = hota::synthetic_logistic(60, 3).X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (int j = 1; j < 7; ++j) sep << X(i, j) << ",";
        sep << (X(i, 1) > 0 ? 1 : 0) << "\n";
    }
    const auto sep_path = testutil::write_file(dir / "sep.csv", sep.str());
    EXPECT_EQ(run("sample --model logistic --data " + sep_path + " --T 100"), 3);

    EXPECT_EQ(run("sample --model linkage --T 1000"), 0);
    EXPECT_EQ(run("sample --model linkage --method exact --T 1000"), 0);
}

TEST(Cli, CompareSameSeedIsIdentical) {
    const auto out = (testutil::scratch_dir() / "c.json").string();
    ASSERT_EQ(run("compare --model linkage --T 20000 --seed 3 --out " + out), 0);
    const auto j = read_json(out);
    EXPECT_EQ(j["ks_distance"].get<double>(), 0.0);
    ASSERT_EQ(j["runs"].size(), 2u);
    EXPECT_EQ(j["runs"][0]["mean"], j["runs"][1]["mean"]);
    EXPECT_TRUE(j["timing"].contains("hota_ms"));
}

TEST(Cli, CompareHotaVsMhCensreg) {
    REQUIRE_FIXTURE("motorette.csv");
    const auto dir = testutil::scratch_dir();
    const auto out = (dir / "c.json").string(), ov = (dir / "o.csv").string();
    ASSERT_EQ(run("compare --model censreg --param tau --method hota --method-b mh --out " + out + " --overlay " + ov), 0);
    const auto j = read_json(out);
    EXPECT_LE(j["ks_distance"].get<double>(), 0.02);
    EXPECT_GT(j["timing"]["mh_ms"].get<double>(), j["timing"]["hota_ms"].get<double>());
    EXPECT_NEAR(j["runs"][0]["mean"].get<double>(), j["runs"][1]["mean"].get<double>(), 0.01);
    EXPECT_NEAR(j["runs"][0]["sd"].get<double>(), j["runs"][1]["sd"].get<double>(), 0.01);
    const auto c = read_csv(ov);
    EXPECT_EQ(c.header, (std::vector<std::string>{"psi", "density_a", "density_b"}));
    EXPECT_TRUE(std::filesystem::exists(ov + ".config.json"));
}

TEST(Cli, ComparePriorsLogistic) {
    REQUIRE_FIXTURE("urine.csv");
    const auto out = (testutil::scratch_dir() / "c.json").string();
    ASSERT_EQ(run("compare --model logistic --param beta6 --prior flat --prior-b normal:k=100 --out " + out), 0);
    EXPECT_LE(read_json(out)["ks_distance"].get<double>(), 0.01);
}

TEST(Cli, CompareRejectsInvalidSecondRun) {
    EXPECT_EQ(run("compare --model logistic --data synthetic --prior-b matching --method-b mh"), 2);
    EXPECT_EQ(run("compare --model censreg --data synthetic --method-b exact"), 2);
}

TEST(Cli, CurveLinkageMatchesExactDensity) {
    const auto out = (testutil::scratch_dir() / "curve.csv").string();
    ASSERT_EQ(run("curve --model linkage --out " + out), 0);
    const auto c = read_csv(out);
    ASSERT_EQ(c.header, (std::vector<std::string>{"psi", "ell_p", "r_p", "q_b", "r_star", "tail_prob", "laplace_density"}));
    const hota::ExactLinkagePosterior post(hota::reference_linkage_data());
    double peak = 0, dev = 0;
    for (const auto& r : c.rows) {
        peak = std::max(peak, post.density(r[0]));
        dev = std::max(dev, std::abs(r[6] - post.density(r[0])));
    }
    EXPECT_LE(dev, 0.01 * peak);
    for (std::size_t i = 1; i < c.rows.size(); ++i) {
        EXPECT_LT(c.rows[i][4], c.rows[i - 1][4]);
        EXPECT_GT(c.rows[i][5], c.rows[i - 1][5]);
    }
    EXPECT_TRUE(std::filesystem::exists(out + ".config.json"));
}

TEST(Cli, CurveMatchingUsesClosedForm) {
    const auto out = (testutil::scratch_dir() / "curve.csv").string();
    ASSERT_EQ(run("curve --model logistic --data synthetic --param beta6 --prior matching --out " + out), 0);
    const auto c = read_csv(out);
    // rebuild in-process and compare q_B against the closed form
    const auto m = hota::make_logistic_model(hota::synthetic_logistic(200, 42));
    const auto curve = hota::build_rstar_curve(m, 6, hota::PriorSpec::matching());
    ASSERT_EQ(c.rows.size(), curve.psi_grid.size());
    for (std::size_t i = 0; i < c.rows.size(); ++i) {
        EXPECT_NEAR(c.rows[i][3], hota::q_b_matching(c.rows[i][0], *curve.profile), 1e-9);
        EXPECT_TRUE(std::isnan(c.rows[i][6]));
    }
}
