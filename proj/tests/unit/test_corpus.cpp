#include <grape/config.hpp>
#include <grape/corpus.hpp>
#include <grape/errors.hpp>
#include <grape/graph.hpp>
#include <grape/harness.hpp>
#include <grape/io.hpp>

#include <doctest.h>

#include <algorithm>
#include <filesystem>

using namespace grape;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("grape_test_" + name);
    fs::remove_all(dir);
    return dir;
}

bool has_changed_node(const CodeGraph& g)
{
    return std::any_of(g.nodes.begin(), g.nodes.end(), [](const GraphNode& n) { return n.version != Version::Both; });
}

} // namespace

TEST_CASE("generated patches")
{
    CorpusConfig c;
    c.n = 20;
    const auto a = generate_patches(c);
    const auto b = generate_patches(c);
    REQUIRE(a.size() == 20);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].buggy == b[i].buggy);
        CHECK(a[i].fixed == b[i].fixed);
        CHECK(a[i].is_fix == (i % 2 == 0));
        CHECK(a[i].buggy != a[i].fixed);
        if (a[i].is_fix) {
            REQUIRE(a[i].cwe);
            CHECK(fix_kinds().at(static_cast<std::size_t>(*a[i].cwe)) == a[i].kind);
        } else {
            CHECK_FALSE(a[i].cwe);
            CHECK_FALSE(a[i].cvss);
        }
    }
    c.seed = 8;
    CHECK(generate_patches(c)[0].buggy != a[0].buggy);

    SUBCASE("restricted kinds")
    {
        c.defect_kinds = { "zero-check" };
        for (const GeneratedPatch& p : generate_patches(c))
            if (p.is_fix)
                CHECK(p.kind == "zero-check");
    }
    SUBCASE("bad requests")
    {
        c.n = 9;
        CHECK_THROWS_AS(generate_patches(c), ContractError);
        c.n = 20;
        c.defect_kinds = { "no-such-kind" };
        CHECK_THROWS_AS(generate_patches(c), ContractError);
    }
}

TEST_CASE("written corpus")
{
    CorpusConfig c;
    c.n = 40;
    const auto patches = generate_patches(c);
    const fs::path dir = scratch("corpus");
    const fs::path manifest = write_corpus(patches, dir, "test corpus");
    CHECK(read_text_file(manifest).rfind("# test corpus\n", 0) == 0);

    const auto samples = read_manifest(manifest);
    REQUIRE(samples.size() == 40);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].id == patches[i].id);
        const CodeGraph g = import_graph_json(samples[i].mcpg_path);
        CHECK_FALSE(g.nodes.empty());
        CHECK(has_changed_node(g));
    }
    for (Task t : { Task::Binary, Task::Cwe, Task::Severity }) {
        const Dataset d = load_dataset(samples, t);
        CHECK(d.items.size() + d.excluded == 40);
    }
    fs::remove_all(dir);
}

TEST_CASE("configuration files")
{
    PipelineConfig c;
    apply_config_text(c, "# experiment\nlr = 0.01\n  epochs=7  \ntask = cwe\nno_edge_features = true\n"
                         "graph_structure = DDG+CDG\noutput_dir = runs/a\n");
    CHECK(c.train.lr == 0.01);
    CHECK(c.train.epochs == 7);
    CHECK(c.train.task == Task::Cwe);
    CHECK(c.train.no_edge_features);
    CHECK(c.train.graph_structure == GraphStructure::DdgCdg);
    CHECK(c.output_dir == fs::path("runs/a"));

    SUBCASE("round trip")
    {
        c.train.weight_decay = 0.1 + 0.2;
        PipelineConfig back;
        apply_config_text(back, config_to_text(c));
        CHECK(config_to_text(back) == config_to_text(c));
        CHECK(back.train.weight_decay == c.train.weight_decay);
    }
    SUBCASE("every key is listed")
    {
        const std::string text = config_to_text(c);
        for (const ConfigKey& k : config_keys())
            CHECK(text.find("\n" + k.name + " = ") != std::string::npos);
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_WITH_AS(apply_config_text(c, "lr = 0.1\nlearning_rate = 0.1\n"), doctest::Contains("2"),
            ParseError);
        CHECK_THROWS_AS(apply_config_text(c, "epochs = many"), ParseError);
        CHECK_THROWS_AS(apply_config_text(c, "task = regression"), ParseError);
        CHECK_THROWS_AS(apply_config_text(c, "just words"), ParseError);
        CHECK_THROWS_AS(set_config_value(c, "hidden", "-3"), ParseError);
    }
}
