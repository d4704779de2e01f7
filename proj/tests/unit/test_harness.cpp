#include <grape/errors.hpp>
#include <grape/harness.hpp>

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>

using namespace grape;

namespace {

Confusion binary_confusion(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn)
{
    return { { tn, fp }, { fn, tp } };
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t classes)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(i % classes);
    return out;
}

} // namespace

TEST_CASE("manifest parsing")
{
    const std::string text = "# corpus header\n"
                             "\n"
                             R"({"id":"a","label":"fix","mcpg":"samples/a.json","cwe":3,"cvss":7.5})"
                             "\n"
                             R"({"id":"b","label":"nonfix","mcpg":"/abs/b.json"})"
                             "\n";
    const auto samples = parse_manifest(text, "/data");
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].id == "a");
    CHECK(samples[0].is_fix);
    CHECK(samples[0].mcpg_path == std::filesystem::path("/data/samples/a.json"));
    CHECK(samples[0].cwe == 3);
    CHECK(samples[0].cvss == doctest::Approx(7.5));
    CHECK_FALSE(samples[1].is_fix);
    CHECK(samples[1].mcpg_path == std::filesystem::path("/abs/b.json"));

    SUBCASE("round trip through manifest_record")
    {
        const auto again = parse_manifest(manifest_record(samples[0]) + "\n");
        CHECK(again[0].id == "a");
        CHECK(again[0].cwe == 3);
    }
    SUBCASE("errors name the line")
    {
        CHECK_THROWS_WITH_AS(parse_manifest("\n{\"id\":\"x\",\"label\":\"maybe\",\"mcpg\":\"m\"}\n"),
            doctest::Contains("line 2"), ValidationError);
        CHECK_THROWS_AS(parse_manifest("{\"label\":\"fix\",\"mcpg\":\"m\"}"), ValidationError);
        CHECK_THROWS_AS(parse_manifest("not json"), ValidationError);
        CHECK_THROWS_AS(parse_manifest(R"({"id":"x","label":"nonfix","mcpg":"m","cwe":1})"), ValidationError);
    }
}

TEST_CASE("severity bands")
{
    CHECK(severity_band(9.8) == Severity::Critical);
    CHECK(severity_band(9.0) == Severity::Critical);
    CHECK(severity_band(8.9) == Severity::High);
    CHECK(severity_band(7.0) == Severity::High);
    CHECK(severity_band(4.0) == Severity::Medium);
    CHECK(severity_band(3.9) == Severity::Low);
    CHECK(severity_band(0.1) == Severity::Low);
    CHECK(severity_band(10.0) == Severity::Critical);
    CHECK_THROWS_AS(severity_band(10.5), BandingError);
    CHECK_THROWS_AS(severity_band(0.0), BandingError);
    CHECK_THROWS_AS(severity_band(std::nan("")), BandingError);
}

TEST_CASE("task labels")
{
    Sample fix { "f", "m", true, 2, 9.8 };
    Sample bare { "g", "m", true, std::nullopt, std::nullopt };
    Sample nonfix { "n", "m", false, std::nullopt, std::nullopt };
    CHECK(task_label(fix, Task::Binary) == 1u);
    CHECK(task_label(nonfix, Task::Binary) == 0u);
    CHECK(task_label(fix, Task::Cwe) == 2u);
    CHECK(task_label(fix, Task::Severity) == 3u);
    CHECK_FALSE(task_label(nonfix, Task::Cwe));
    CHECK_FALSE(task_label(bare, Task::Severity));
    CHECK_FALSE(task_label(bare, Task::Cwe));
}

TEST_CASE("stratified split")
{
    const auto labels = balanced_labels(100, 2);
    const Split s = split_dataset(labels, 11);
    CHECK(s.train.size() == 80);
    CHECK(s.test.size() == 20);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));

    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (std::size_t i : s.test)
        CHECK(all.insert(i).second);
    CHECK(all.size() == 100);

    const auto positives = std::count_if(s.test.begin(), s.test.end(), [&](std::size_t i) { return labels[i] == 1; });
    CHECK(positives == 10);

    const Split again = split_dataset(labels, 11);
    CHECK(again.train == s.train);
    CHECK(split_dataset(labels, 12).test != s.test);

    SUBCASE("uneven classes")
    {
        std::vector<std::size_t> l(37, 0);
        for (std::size_t i = 0; i < 11; ++i)
            l[i * 3] = 1;
        const Split u = split_dataset(l, 3);
        CHECK(u.train.size() == 30);
        CHECK(u.test.size() == 7);
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(std::any_of(u.test.begin(), u.test.end(), [&](std::size_t i) { return l[i] == c; }));
    }
    SUBCASE("singleton classes go to train")
    {
        std::vector<std::size_t> l = balanced_labels(20, 2);
        l.push_back(5);
        const Split w = split_dataset(l, 1);
        CHECK(std::find(w.train.begin(), w.train.end(), 20u) != w.train.end());
        CHECK(w.warnings.size() == 1);
    }
    CHECK_THROWS_AS(split_dataset({ 0, 1, 0, 1 }, 1), ContractError);
}

TEST_CASE("binary metrics")
{
    const MetricsReport m = compute_metrics(binary_confusion(50, 10, 40, 0), Task::Binary);
    CHECK(m.precision == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(m.recall == doctest::Approx(1.0));
    CHECK(m.f1 == doctest::Approx(0.9091).epsilon(1e-4));
    REQUIRE(m.fpr);
    CHECK(*m.fpr == doctest::Approx(0.2));
    CHECK(m.accuracy == doctest::Approx(0.9));
    CHECK(m.mcc == doctest::Approx(2000.0 / std::sqrt(60.0 * 50.0 * 50.0 * 40.0)).epsilon(1e-12));

    const MetricsReport perfect = compute_metrics(binary_confusion(7, 0, 9, 0), Task::Binary);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.mcc == 1.0);
    CHECK(*perfect.fpr == 0.0);

    // always predicting "fix"
    const MetricsReport constant = compute_metrics(binary_confusion(30, 70, 0, 0), Task::Binary);
    CHECK(constant.mcc == 0.0);
    CHECK(constant.recall == 1.0);

    // no positive predictions: precision has a zero denominator
    const MetricsReport none = compute_metrics(binary_confusion(0, 0, 60, 40), Task::Binary);
    CHECK(none.precision == 0.0);
    CHECK(none.f1 == 0.0);

    const MetricsReport inverted = compute_metrics(binary_confusion(0, 40, 0, 60), Task::Binary);
    CHECK(inverted.mcc == doctest::Approx(-1.0));

    CHECK_THROWS_AS(compute_metrics(binary_confusion(0, 0, 0, 0), Task::Binary), ContractError);
    CHECK_THROWS_AS(compute_metrics({ { 1, 2, 3 }, { 1, 2, 3 }, { 1, 2, 3 } }, Task::Binary), ContractError);
}

TEST_CASE("multi-class metrics")
{
    // reference values from an independent numpy computation
    const MetricsReport s
        = compute_metrics({ { 5, 1, 0, 0 }, { 2, 6, 1, 0 }, { 0, 1, 7, 2 }, { 0, 0, 1, 4 } }, Task::Severity);
    CHECK(s.accuracy == doctest::Approx(0.7333333333333333).epsilon(1e-12));
    CHECK(s.precision == doctest::Approx(0.7271825396825397).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(0.7348069886769576).epsilon(1e-12));
    CHECK(s.mcc == doctest::Approx(0.641592459219449).epsilon(1e-12));
    CHECK_FALSE(s.fpr);

    const Confusion c7 { { 3, 1, 0, 0, 0, 0, 0 }, { 0, 4, 0, 0, 1, 0, 0 }, { 0, 0, 2, 0, 0, 0, 1 },
        { 1, 0, 0, 5, 0, 0, 0 }, { 0, 0, 0, 0, 0, 2, 0 }, { 0, 0, 1, 0, 0, 3, 0 }, { 0, 0, 0, 0, 0, 0, 0 } };
    const MetricsReport c = compute_metrics(c7, Task::Cwe);
    CHECK(c.accuracy == doctest::Approx(0.7083333333333334).epsilon(1e-12));
    CHECK(c.precision == doctest::Approx(0.5452380952380953).epsilon(1e-12));
    CHECK(c.recall == doctest::Approx(0.5428571428571429).epsilon(1e-12));
    CHECK(c.f1 == doctest::Approx(0.5417748917748918).epsilon(1e-12));
    CHECK(c.mcc == doctest::Approx(0.6483109048568563).epsilon(1e-12));

    SUBCASE("MCC is symmetric in truth and prediction")
    {
        Confusion t(7, std::vector<std::uint64_t>(7));
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j)
                t[j][i] = c7[i][j];
        CHECK(compute_metrics(t, Task::Cwe).mcc == doctest::Approx(c.mcc).epsilon(1e-14));
    }
    SUBCASE("binary MCC agrees with the generalized form")
    {
        const Confusion b = binary_confusion(13, 4, 21, 6);
        const double tp = 13, fp = 4, tn = 21, fn = 6;
        const double expected = (tp * tn - fp * fn) / std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
        CHECK(compute_metrics(b, Task::Binary).mcc == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("metrics files")
{
    const MetricsReport m = compute_metrics(binary_confusion(50, 10, 40, 0), Task::Binary);
    const std::string csv = metrics_csv(m, "grape test");
    CHECK(csv.rfind("# grape test\nmetric,value\n", 0) == 0);
    CHECK(csv.find("f1,0.909091\n") != std::string::npos);
    CHECK(csv.find("fix_recall,1.000000\n") != std::string::npos);
    CHECK(metrics_json_value(m).find("\"fpr\"") != std::string::npos);
}

TEST_CASE("PCA against Eigen")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    Mat x(50, 10);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            x(i, j) = normal(rng) * static_cast<double>(j + 1);

    const PcaResult p = pca_project(x, 3);
    Eigen::MatrixXd e(50, 10);
    for (std::size_t i = 0; i < 50; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x(i, j);
    const Eigen::MatrixXd centered = e.rowwise() - e.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / 49.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (int k = 0; k < 3; ++k) {
        const Eigen::Index col = 9 - k; // Eigen sorts ascending
        CHECK(p.variances[static_cast<std::size_t>(k)] == doctest::Approx(solver.eigenvalues()(col)).epsilon(1e-10));
        const Eigen::VectorXd ref = centered * solver.eigenvectors().col(col);
        const double sign = ref(0) * p.coords(0, static_cast<std::size_t>(k)) < 0 ? -1.0 : 1.0;
        double worst = 0;
        for (Eigen::Index i = 0; i < 50; ++i)
            worst = std::max(worst, std::abs(sign * ref(i) - p.coords(static_cast<std::size_t>(i), static_cast<std::size_t>(k))));
        CHECK(worst < 1e-8);
    }
    CHECK(std::is_sorted(p.variances.rbegin(), p.variances.rend()));

    SUBCASE("projection is deterministic")
    {
        const PcaResult q = pca_project(x, 3);
        CHECK(q.coords == p.coords);
    }
    SUBCASE("projecting the projection keeps it")
    {
        const PcaResult q = pca_project(p.coords, 3);
        for (std::size_t i = 0; i < 50; ++i)
            for (std::size_t k = 0; k < 3; ++k)
                CHECK(std::abs(std::abs(q.coords(i, k)) - std::abs(p.coords(i, k))) < 1e-9);
    }
    SUBCASE("collinear data has one non-zero variance")
    {
        Mat line(20, 4);
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                line(i, j) = static_cast<double>(i) * static_cast<double>(j + 1);
        const PcaResult l = pca_project(line, 2);
        CHECK(l.variances[0] > 1.0);
        CHECK(std::abs(l.variances[1]) < 1e-9);
    }
    CHECK_THROWS_AS(pca_project(x, 11), ContractError);
    CHECK_THROWS_AS(pca_project(Mat(1, 3), 2), ContractError);
}

TEST_CASE("training")
{
    std::mt19937_64 rng(9);
    std::vector<GraphInput> inputs;
    std::vector<std::size_t> labels, all;
    TrainConfig tc;
    const NegcnConfig mc = tc.model_config(8);
    for (std::size_t i = 0; i < 20; ++i) {
        EmbeddedGraph g = testing::random_embedded(rng, 3 + i % 5, 8);
        const double shift = i % 2 ? 0.5 : -0.5;
        for (double& v : g.x.values())
            v += shift;
        inputs.push_back(prepare_input(g, mc));
        labels.push_back(i % 2);
        all.push_back(i);
    }

    SUBCASE("a separable training set is fitted")
    {
        tc.epochs = 200;
        const RunResult r = train_model(mc, inputs, labels, all, all, tc, 3);
        CHECK(r.history.size() == 200);
        CHECK(r.history.back().train_loss < r.history.front().train_loss);
        CHECK(r.final_test.accuracy == 1.0);
    }
    SUBCASE("same seed, same model")
    {
        tc.epochs = 4;
        const RunResult a = train_model(mc, inputs, labels, all, all, tc, 3);
        const RunResult b = train_model(mc, inputs, labels, all, all, tc, 3);
        CHECK(a.model == b.model);
        CHECK(a.history.back().train_loss == b.history.back().train_loss);
        const RunResult c = train_model(mc, inputs, labels, all, all, tc, 4);
        CHECK_FALSE(a.model == c.model);
        CHECK(a.history[1].lr == doctest::Approx(tc.lr * tc.lr_gamma));
    }
    SUBCASE("zero epochs returns the initial model")
    {
        tc.epochs = 0;
        const RunResult r = train_model(mc, inputs, labels, all, all, tc, 3);
        CHECK(r.history.empty());
        CHECK(r.model == ModelState(mc, 3));
    }
}

TEST_CASE("config validation")
{
    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());
    tc.lr = 0;
    CHECK_THROWS_AS(tc.validate(), ContractError);
    tc = {};
    tc.pool_ratio = 1.5;
    CHECK_THROWS_AS(tc.validate(), ContractError);
    tc = {};
    tc.dropout = 1.0;
    CHECK_THROWS_AS(tc.validate(), ContractError);
}
