#include <grape/cli.hpp>
#include <grape/io.hpp>

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

namespace fs = std::filesystem;
using grape::read_text_file;

namespace {

int grape_cmd(std::vector<std::string> args)
{
    args.insert(args.begin(), "grape");
    args.push_back("--log-level");
    args.push_back("error");
    return grape::cli::run(args);
}

} // namespace

TEST_CASE("exit codes")
{
    CHECK(grape::cli::run({ "grape", "--help" }) == 0);
    CHECK(grape::cli::run({ "grape", "train", "--help" }) == 0);
    CHECK(grape_cmd({}) == 1);
    CHECK(grape_cmd({ "train" }) == 1);
    CHECK(grape_cmd({ "frobnicate" }) == 1);
    CHECK(grape_cmd({ "dot", "/no/such/graph.json" }) == 1);
}

TEST_CASE("pipeline through the command line")
{
    const fs::path dir = fs::temp_directory_path() / "grape_test_cli";
    fs::remove_all(dir);
    const std::string corpus = (dir / "corpus").string();
    const std::string manifest = (dir / "corpus" / "manifest.jsonl").string();

    REQUIRE(grape_cmd({ "gen-corpus", "--n", "20", "--seed", "3", "--out", corpus }) == 0);
    REQUIRE(fs::exists(manifest));

    const std::vector<std::string> train { "train", "--manifest", manifest, "--epochs", "2", "--seed", "5" };
    auto with_out = [&](std::vector<std::string> args, const std::string& out) {
        args.push_back("--out");
        args.push_back(out);
        return args;
    };
    REQUIRE(grape_cmd(with_out(train, (dir / "a").string())) == 0);
    REQUIRE(grape_cmd(with_out(train, (dir / "b").string())) == 0);
    for (const char* f : { "metrics.json", "metrics.csv", "history.csv" })
        CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));

    const auto metrics = nlohmann::json::parse(read_text_file(dir / "a" / "metrics.json"));
    CHECK(metrics["meta"]["tool"] == "grape");
    CHECK(metrics["meta"]["seed"] == 5);
    CHECK(metrics["config"]["epochs"] == 2);
    CHECK(metrics["split"]["train"] == 16);
    CHECK(metrics["headline"].contains("f1"));

    CHECK(grape_cmd(with_out({ "train", "--manifest", manifest, "--set", "typo=1" }, (dir / "c").string())) == 1);

    const std::string model = (dir / "a" / "model.ckpt").string();
    CHECK(grape_cmd({ "eval", "--model", model, "--manifest", manifest, "--out", (dir / "eval.json").string() }) == 0);
    CHECK(fs::exists(dir / "eval.csv"));

    const std::string graph = (dir / "corpus" / "samples" / "s0000" / "mcpg.json").string();
    REQUIRE(grape_cmd({ "predict", "--model", model, "--graph", graph, "--out", (dir / "p.json").string() }) == 0);
    const auto p = nlohmann::json::parse(read_text_file(dir / "p.json"));
    CHECK(p["probabilities"].size() == 2);

    REQUIRE(grape_cmd({ "pca", "--model", model, "--manifest", manifest, "--out", (dir / "pca.csv").string() }) == 0);
    const std::string coords = read_text_file(dir / "pca.csv");
    CHECK(coords.rfind("# grape", 0) == 0);
    CHECK(coords.find("\nx,y,label\n") != std::string::npos);

    REQUIRE(grape_cmd({ "dot", graph, "--out", (dir / "g.dot").string() }) == 0);
    CHECK(read_text_file(dir / "g.dot").find("digraph") != std::string::npos);

    // ingest -> graph -> mcpg rebuilds the corpus MCPG
    const fs::path sample = dir / "corpus" / "samples" / "s0000";
    fs::create_directories(dir / "pre");
    fs::create_directories(dir / "post");
    fs::copy_file(sample / "buggy.mini", dir / "pre" / "s0000.mini");
    fs::copy_file(sample / "fixed.mini", dir / "post" / "s0000.mini");
    const std::string diff = (sample / "patch.diff").string();
    REQUIRE(grape_cmd({ "ingest", "--diff", diff, "--pre", (dir / "pre").string(), "--post",
                (dir / "post").string(), "--out", (dir / "ing" / "pair.json").string() })
        == 0);
    REQUIRE(grape_cmd({ "graph", "--src", (dir / "ing" / "buggy" / "s0000.mini").string(), "--version", "buggy",
                "--out", (dir / "b.json").string() })
        == 0);
    REQUIRE(grape_cmd({ "graph", "--src", (dir / "ing" / "fixed" / "s0000.mini").string(), "--version", "fixed",
                "--out", (dir / "f.json").string() })
        == 0);
    REQUIRE(grape_cmd({ "mcpg", "--pre", (dir / "b.json").string(), "--post", (dir / "f.json").string(), "--diff",
                diff, "--out", (dir / "m.json").string() })
        == 0);
    CHECK(read_text_file(dir / "m.json") == read_text_file(graph));

    CHECK(grape_cmd({ "embed", "--corpus", manifest, "--out", (dir / "v.bin").string(), "--dim", "16" }) == 0);
    fs::remove_all(dir);
}
