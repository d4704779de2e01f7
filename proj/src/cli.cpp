#include <grape/cli.hpp>
#include <grape/config.hpp>
#include <grape/corpus.hpp>
#include <grape/cpg.hpp>
#include <grape/diff.hpp>
#include <grape/errors.hpp>
#include <grape/harness.hpp>
#include <grape/io.hpp>
#include <grape/mcpg.hpp>
#include <grape/normalize.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace grape::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string provenance(const std::string& command, std::uint64_t seed)
{
    return std::string(tool_name) + " " + tool_version + " command=" + command + " seed=" + std::to_string(seed);
}

json meta(const std::string& command, std::uint64_t seed)
{
    return { { "tool", tool_name }, { "version", tool_version }, { "command", command }, { "seed", seed } };
}

void setup_logging(const std::string& level)
{
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = std::make_shared<spdlog::logger>("grape", std::make_shared<spdlog::sinks::stderr_sink_st>());
        l->set_pattern("[%l] %v");
        spdlog::set_default_logger(l);
        return l;
    }();
    logger->set_level(spdlog::level::from_str(level));
}

std::string fmt6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_json(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

std::vector<GraphInput> embed_items(const Dataset& data, const VocabEmbedding& vocab, const EmbedConfig& ec,
    const NegcnConfig& mc)
{
    std::vector<GraphInput> out;
    for (const LabeledGraph& item : data.items)
        out.push_back(prepare_input(embed_graph(item.graph, vocab, ec), mc));
    return out;
}

void log_warnings(const std::vector<std::string>& warnings)
{
    for (const std::string& w : warnings)
        spdlog::warn("{}", w);
}

json metrics_json(const MetricsReport& m) { return json::parse(metrics_json_value(m)); }

// ------------------------------------------------------------- ingest

struct IngestArgs {
    std::string diff, pre, post, out;
};

void ingest(const IngestArgs& a, std::uint64_t seed)
{
    PatchDiff diff = parse_unified_diff(read_text_file(a.diff));
    std::vector<SourceFile> files;
    for (const FileChange& f : diff.files) {
        SourceFile s { f.path, {}, {} };
        if (fs::exists(fs::path(a.pre) / f.path))
            s.buggy = read_text_file(fs::path(a.pre) / f.path);
        if (fs::exists(fs::path(a.post) / f.path))
            s.fixed = read_text_file(fs::path(a.post) / f.path);
        if (s.buggy.empty() && s.fixed.empty())
            throw LookupError("file " + f.path + " exists in neither " + a.pre + " nor " + a.post);
        files.push_back(std::move(s));
    }
    const SourcePair pair = pair_sources(std::move(files), diff);
    const fs::path base = fs::path(a.out).parent_path();
    json j;
    j["meta"] = meta("ingest", seed);
    j["files"] = json::array();
    for (const SourceFile& f : pair.files) {
        const fs::path buggy = fs::path("buggy") / f.path, fixed = fs::path("fixed") / f.path;
        write_text_file(base / buggy, f.buggy);
        write_text_file(base / fixed, f.fixed);
        const FileChange* change = pair.diff.find(f.path);
        j["files"].push_back({ { "path", f.path }, { "buggy", buggy.generic_string() },
            { "fixed", fixed.generic_string() }, { "removed", change ? change->removed_lines : std::set<int> {} },
            { "added", change ? change->added_lines : std::set<int> {} } });
    }
    auto table = [](const NameTable& t) {
        json a = json::array();
        for (const auto& [original, image] : t.entries())
            a.push_back({ original, image });
        return a;
    };
    j["names"] = { { "functions", table(pair.name_map.functions) }, { "variables", table(pair.name_map.variables) },
        { "strings", table(pair.name_map.strings) } };
    write_json(a.out, j);
    spdlog::info("normalized {} file(s) into {}", pair.files.size(), base.empty() ? "." : base.string());
}

// -------------------------------------------------------------- graph

struct GraphArgs {
    std::string src, version = "buggy", out;
};

void graph(const GraphArgs& a)
{
    const auto version = parse_version(a.version);
    if (!version)
        throw ContractError("--version must be buggy, fixed or both");
    const auto graphs = build_cpg(read_text_file(a.src), *version);
    if (graphs.size() == 1)
        export_graph_json(graphs[0], a.out);
    else
        export_graphs_json(graphs, a.out);
    spdlog::info("{} function graph(s) written to {}", graphs.size(), a.out);
}

// --------------------------------------------------------------- mcpg

struct McpgArgs {
    std::vector<std::string> pre, post;
    std::string diff, out;
};

void mcpg(const McpgArgs& a)
{
    std::vector<CodeGraph> buggy, fixed;
    for (const std::string& p : a.pre)
        for (CodeGraph& g : import_graphs_json(p))
            buggy.push_back(std::move(g));
    for (const std::string& p : a.post)
        for (CodeGraph& g : import_graphs_json(p))
            fixed.push_back(std::move(g));
    std::optional<PatchDiff> diff;
    if (!a.diff.empty())
        diff = parse_unified_diff(read_text_file(a.diff));
    const CodeGraph m = build_mcpg_from_graphs(buggy, fixed, diff ? &*diff : nullptr);
    export_graph_json(m, a.out);
    spdlog::info("MCPG with {} nodes and {} edges written to {}", m.nodes.size(), m.edges.size(), a.out);
}

// -------------------------------------------------------------- embed

struct EmbedArgs {
    std::string corpus, out;
    int dim = 64;
};

void embed(const EmbedArgs& a, std::uint64_t seed)
{
    const Dataset data = load_dataset(read_manifest(a.corpus), Task::Binary);
    log_warnings(data.warnings);
    std::vector<const CodeGraph*> graphs;
    for (const LabeledGraph& item : data.items)
        graphs.push_back(&item.graph);
    SkipGramConfig sg;
    sg.dim = a.dim;
    sg.seed = seed;
    const VocabEmbedding vocab = train_vocabulary(graphs, sg);
    vocab.save(a.out);
    spdlog::info("vocabulary of {} tokens x {} written to {}", vocab.size(), vocab.dim(), a.out);
}

// -------------------------------------------------------------- train

struct TrainArgs {
    std::string config, manifest, out, task, graph_structure;
    std::vector<std::string> sets;
    int repeats = 0;
    int epochs = -1;
    bool no_edge_features = false;
    bool no_type_embedding = false;
};

json config_json(const PipelineConfig& c)
{
    // paths are left out so that reruns in other directories compare equal
    static const std::set<std::string> paths { "corpus_dir", "vocab_path", "model_path", "output_dir", "log_level" };
    json j = json::object();
    for (const ConfigKey& k : config_keys())
        if (!paths.count(k.name)) {
            const std::string v = get_config_value(c, k.name);
            const json parsed = json::parse(v, nullptr, false);
            j[k.name] = parsed.is_discarded() || parsed.is_string() ? json(v) : parsed;
        }
    return j;
}

std::string history_csv(const Experiment& ex, const std::string& header)
{
    std::ostringstream out;
    out << "# " << header << "\n";
    out << "run,epoch,lr,train_loss,test_accuracy,test_precision,test_recall,test_f1,test_fpr,test_mcc\n";
    for (std::size_t r = 0; r < ex.runs.size(); ++r)
        for (const EpochRecord& e : ex.runs[r].history) {
            char lr[32];
            std::snprintf(lr, sizeof lr, "%.6g", e.lr);
            out << r << "," << e.epoch << "," << lr << "," << fmt6(e.train_loss) << "," << fmt6(e.test.accuracy)
                << "," << fmt6(e.test.precision) << "," << fmt6(e.test.recall) << "," << fmt6(e.test.f1) << ","
                << (e.test.fpr ? fmt6(*e.test.fpr) : "") << "," << fmt6(e.test.mcc) << "\n";
        }
    return out.str();
}

void train(const TrainArgs& a, PipelineConfig config, std::optional<std::uint64_t> seed)
{
    if (!a.config.empty())
        apply_config_text(config, read_text_file(a.config));
    for (const std::string& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError("--set expects key=value, got '" + s + "'");
        set_config_value(config, s.substr(0, eq), s.substr(eq + 1));
    }
    if (!a.task.empty())
        set_config_value(config, "task", a.task);
    if (!a.graph_structure.empty())
        set_config_value(config, "graph_structure", a.graph_structure);
    if (a.repeats > 0)
        config.train.repeats = a.repeats;
    if (a.epochs >= 0)
        config.train.epochs = a.epochs;
    if (a.no_edge_features)
        config.train.no_edge_features = true;
    if (a.no_type_embedding)
        config.train.no_type_embedding = true;
    if (seed)
        config.train.seed = *seed;
    if (!a.out.empty())
        config.output_dir = a.out;
    setup_logging(config.log_level);
    const TrainConfig& tc = config.train;
    tc.validate();

    const Dataset data = load_dataset(read_manifest(a.manifest), tc.task);
    log_warnings(data.warnings);
    spdlog::info("{} samples for the {} task ({} not taking part)", data.items.size(), to_string(tc.task),
        data.excluded);
    const Experiment ex = run_experiment(data, tc);
    log_warnings(ex.warnings);
    spdlog::info("split: {} train, {} test; vocabulary {} tokens", ex.split.train.size(), ex.split.test.size(),
        ex.vocab.size());

    const std::string header = provenance("train", tc.seed) + " task=" + std::string(to_string(tc.task));
    json runs = json::array();
    double sums[5] = { 0, 0, 0, 0, 0 };
    for (std::size_t r = 0; r < ex.runs.size(); ++r) {
        const MetricsReport& m = ex.runs[r].final_test;
        spdlog::info("run {}: accuracy {:.4f} precision {:.4f} recall {:.4f} f1 {:.4f} mcc {:.4f}", r, m.accuracy,
            m.precision, m.recall, m.f1, m.mcc);
        runs.push_back({ { "run", r }, { "model_seed", ex.runs[r].model_seed }, { "metrics", metrics_json(m) } });
        for (int k = 0; k < 5; ++k)
            sums[k] += std::array { m.accuracy, m.precision, m.recall, m.f1, m.mcc }[static_cast<std::size_t>(k)];
    }
    const double n = static_cast<double>(ex.runs.size());
    json j;
    j["meta"] = meta("train", tc.seed);
    j["meta"]["task"] = std::string(to_string(tc.task));
    j["config"] = config_json(config);
    j["split"] = { { "train", ex.split.train.size() }, { "test", ex.split.test.size() } };
    j["headline"] = metrics_json(ex.runs.back().final_test);
    j["runs"] = runs;
    j["mean"] = { { "accuracy", sums[0] / n }, { "precision", sums[1] / n }, { "recall", sums[2] / n },
        { "f1", sums[3] / n }, { "mcc", sums[4] / n } };

    const fs::path dir = config.output_dir;
    write_json(dir / "metrics.json", j);
    write_text_file(dir / "metrics.csv", metrics_csv(ex.runs.back().final_test, header));
    write_text_file(dir / "history.csv", history_csv(ex, header));
    write_text_file(dir / "config.txt", "# " + header + "\n" + config_to_text(config));

    Checkpoint ck;
    ck.model = ex.runs.back().model;
    ck.vocab = ex.vocab;
    ck.embed = tc.embed_config();
    ck.task = std::string(to_string(tc.task));
    ck.class_names = class_names(tc.task);
    ck.seed = tc.seed;
    save_checkpoint(ck, dir / config.model_path);
    spdlog::info("model and metrics written to {}", dir.string());
}

// --------------------------------------------------------- eval, pca

Task checkpoint_task(const Checkpoint& ck)
{
    const auto t = parse_task(ck.task);
    if (!t)
        throw ValidationError("checkpoint names an unknown task '" + ck.task + "'");
    return *t;
}

struct EvalArgs {
    std::string model, manifest, out;
};

void eval(const EvalArgs& a, std::uint64_t seed)
{
    const Checkpoint ck = load_checkpoint(a.model);
    const Task task = checkpoint_task(ck);
    const Dataset data = load_dataset(read_manifest(a.manifest), task);
    log_warnings(data.warnings);
    const auto inputs = embed_items(data, ck.vocab, ck.embed, ck.model.config());
    std::vector<std::size_t> labels, all;
    for (std::size_t i = 0; i < data.items.size(); ++i) {
        labels.push_back(data.items[i].label);
        all.push_back(i);
    }
    const MetricsReport m = compute_metrics(evaluate(ck.model, inputs, labels, all), task);
    json j;
    j["meta"] = meta("eval", seed);
    j["meta"]["task"] = ck.task;
    j["samples"] = all.size();
    j["metrics"] = metrics_json(m);
    if (a.out.empty()) {
        std::cout << j.dump(2) << "\n";
        return;
    }
    write_json(a.out, j);
    fs::path csv = a.out;
    csv.replace_extension(".csv");
    write_text_file(csv, metrics_csv(m, provenance("eval", seed) + " task=" + ck.task));
    spdlog::info("metrics on {} samples written to {}", all.size(), a.out);
}

struct PcaArgs {
    std::string model, manifest, out;
};

void pca(const PcaArgs& a, std::uint64_t seed)
{
    const Checkpoint ck = load_checkpoint(a.model);
    const Task task = checkpoint_task(ck);
    const Dataset data = load_dataset(read_manifest(a.manifest), task);
    log_warnings(data.warnings);
    const auto inputs = embed_items(data, ck.vocab, ck.embed, ck.model.config());
    const PcaResult p = pca_project(patch_representations(ck.model, inputs), 2);
    std::ostringstream out;
    out << "# " << provenance("pca", seed) << " task=" << ck.task << " variances=" << p.variances[0] << ","
        << p.variances[1] << "\n";
    out << "x,y,label\n";
    for (std::size_t i = 0; i < data.items.size(); ++i) {
        char row[96];
        std::snprintf(row, sizeof row, "%.9g,%.9g,", p.coords(i, 0), p.coords(i, 1));
        out << row << ck.class_names.at(data.items[i].label) << "\n";
    }
    write_text_file(a.out, out.str());
    spdlog::info("{} points written to {}", data.items.size(), a.out);
}

// ------------------------------------------------------------ predict

struct PredictArgs {
    std::string model, graph, out;
};

void predict(const PredictArgs& a, std::uint64_t seed)
{
    const Checkpoint ck = load_checkpoint(a.model);
    const CodeGraph g = import_graph_json(a.graph);
    const GraphInput input = prepare_input(embed_graph(g, ck.vocab, ck.embed), ck.model.config());
    const Mat logits = InferenceModel<double>(ck.model).forward(input).logits;
    const Mat probs = softmax_rows(logits);
    std::vector<double> p(probs.values().begin(), probs.values().end());
    std::size_t best = 0;
    for (std::size_t k = 1; k < p.size(); ++k)
        if (p[k] > p[best])
            best = k;
    json j;
    j["label"] = ck.class_names.at(best);
    j["probabilities"] = p;
    j["meta"] = meta("predict", seed);
    if (a.out.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_json(a.out, j);
}

// ---------------------------------------------------------- dot, corpus

struct DotArgs {
    std::string graph, out;
};

void dot(const DotArgs& a, std::uint64_t seed)
{
    const std::string text = "// " + provenance("dot", seed) + "\n" + graph_to_dot(import_graph_json(a.graph));
    if (a.out.empty())
        std::cout << text;
    else
        write_text_file(a.out, text);
}

struct CorpusArgs {
    std::size_t n = 200;
    std::string out;
    std::vector<std::string> kinds;
};

void gen_corpus(const CorpusArgs& a, std::uint64_t seed)
{
    CorpusConfig c;
    c.n = a.n;
    c.seed = seed;
    c.defect_kinds = a.kinds;
    const auto patches = generate_patches(c);
    const fs::path manifest = write_corpus(patches, a.out, provenance("gen-corpus", seed) + " n=" + std::to_string(a.n));
    spdlog::info("{} patches written; manifest {}", patches.size(), manifest.string());
}

} // namespace

int run(const std::vector<std::string>& args)
{
    CLI::App app { "grape: classify source patches with merged code property graphs and NE-GCN", "grape" };
    app.require_subcommand(1);
    std::string log_level = "info";
    std::optional<std::uint64_t> seed;
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
        ->check(CLI::IsMember({ "trace", "debug", "info", "warn", "error", "off" }));
    auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "seed for every random choice");
        sub->fallthrough();
    };

    IngestArgs ingest_args;
    auto* c_ingest = app.add_subcommand("ingest", "normalize the files of a unified diff and record changed lines");
    c_ingest->add_option("--diff", ingest_args.diff, "unified diff")->required()->check(CLI::ExistingFile);
    c_ingest->add_option("--pre", ingest_args.pre, "directory with pre-patch sources")->required();
    c_ingest->add_option("--post", ingest_args.post, "directory with post-patch sources")->required();
    c_ingest->add_option("--out", ingest_args.out, "output manifest (JSON)")->required();
    add_seed(c_ingest);

    GraphArgs graph_args;
    auto* c_graph = app.add_subcommand("graph", "build per-function code property graphs of one source file");
    c_graph->add_option("--src", graph_args.src, "mini-language source")->required()->check(CLI::ExistingFile);
    c_graph->add_option("--version", graph_args.version, "buggy, fixed or both")
        ->check(CLI::IsMember({ "buggy", "fixed", "both" }));
    c_graph->add_option("--out", graph_args.out, "graph JSON")->required();
    add_seed(c_graph);

    McpgArgs mcpg_args;
    auto* c_mcpg = app.add_subcommand("mcpg", "merge, slice and simplify buggy and fixed graphs");
    c_mcpg->add_option("--pre", mcpg_args.pre, "buggy graph JSON files")->required()->check(CLI::ExistingFile);
    c_mcpg->add_option("--post", mcpg_args.post, "fixed graph JSON files")->required()->check(CLI::ExistingFile);
    c_mcpg->add_option("--diff", mcpg_args.diff, "unified diff restricting functions to changed lines")
        ->check(CLI::ExistingFile);
    c_mcpg->add_option("--out", mcpg_args.out, "MCPG JSON")->required();
    add_seed(c_mcpg);

    EmbedArgs embed_args;
    auto* c_embed = app.add_subcommand("embed", "train skip-gram token vectors over a dataset's graphs");
    c_embed->add_option("--corpus", embed_args.corpus, "dataset manifest")->required()->check(CLI::ExistingFile);
    c_embed->add_option("--out", embed_args.out, "vocabulary file")->required();
    c_embed->add_option("--dim", embed_args.dim, "vector size")->check(CLI::PositiveNumber);
    add_seed(c_embed);

    TrainArgs train_args;
    auto* c_train = app.add_subcommand("train", "train and evaluate NE-GCN on a dataset manifest");
    c_train->add_option("--manifest", train_args.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    c_train->add_option("--config", train_args.config, "key = value configuration file")->check(CLI::ExistingFile);
    c_train->add_option("--task", train_args.task, "binary, cwe or severity")
        ->check(CLI::IsMember({ "binary", "cwe", "severity" }));
    c_train->add_option("--repeats", train_args.repeats, "independent runs")->check(CLI::PositiveNumber);
    c_train->add_option("--epochs", train_args.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    c_train->add_option("--graph-structure", train_args.graph_structure, "AST, DDG+CDG or CPG");
    c_train->add_flag("--no-edge-features", train_args.no_edge_features, "drop the edge term");
    c_train->add_flag("--no-type-embedding", train_args.no_type_embedding, "zero node-type features");
    c_train->add_option("--set", train_args.sets, "override a config key (key=value)");
    c_train->add_option("--out", train_args.out, "output directory");
    add_seed(c_train);

    EvalArgs eval_args;
    auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on every sample of a manifest");
    c_eval->add_option("--model", eval_args.model, "checkpoint")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--manifest", eval_args.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--out", eval_args.out, "metrics JSON (a CSV is written next to it)");
    add_seed(c_eval);

    PredictArgs predict_args;
    auto* c_predict = app.add_subcommand("predict", "classify one MCPG");
    c_predict->add_option("--model", predict_args.model, "checkpoint")->required()->check(CLI::ExistingFile);
    c_predict->add_option("--graph", predict_args.graph, "MCPG JSON")->required()->check(CLI::ExistingFile);
    c_predict->add_option("--out", predict_args.out, "output JSON (default: stdout)");
    add_seed(c_predict);

    PcaArgs pca_args;
    auto* c_pca = app.add_subcommand("pca", "project learned patch representations to 2-D");
    c_pca->add_option("--model", pca_args.model, "checkpoint")->required()->check(CLI::ExistingFile);
    c_pca->add_option("--manifest", pca_args.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
    c_pca->add_option("--out", pca_args.out, "coordinates CSV")->required();
    add_seed(c_pca);

    DotArgs dot_args;
    auto* c_dot = app.add_subcommand("dot", "render a graph JSON file as DOT");
    c_dot->add_option("graph", dot_args.graph, "graph JSON")->required()->check(CLI::ExistingFile);
    c_dot->add_option("--out", dot_args.out, "DOT file (default: stdout)");
    add_seed(c_dot);

    CorpusArgs corpus_args;
    auto* c_corpus = app.add_subcommand("gen-corpus", "write a synthetic patch corpus with a manifest");
    c_corpus->add_option("--n", corpus_args.n, "number of patches (at least 10)");
    c_corpus->add_option("--out", corpus_args.out, "output directory")->required();
    c_corpus->add_option("--kinds", corpus_args.kinds, "fix kinds to use (comma separated)")->delimiter(',');
    add_seed(c_corpus);

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    setup_logging(log_level);
    const std::uint64_t s = seed.value_or(1);
    try {
        if (c_ingest->parsed())
            ingest(ingest_args, s);
        else if (c_graph->parsed())
            graph(graph_args);
        else if (c_mcpg->parsed())
            mcpg(mcpg_args);
        else if (c_embed->parsed())
            embed(embed_args, s);
        else if (c_train->parsed()) {
            PipelineConfig config;
            config.log_level = log_level;
            train(train_args, config, seed);
        } else if (c_eval->parsed())
            eval(eval_args, s);
        else if (c_predict->parsed())
            predict(predict_args, s);
        else if (c_pca->parsed())
            pca(pca_args, s);
        else if (c_dot->parsed())
            dot(dot_args, s);
        else if (c_corpus->parsed())
            gen_corpus(corpus_args, seed.value_or(7));
    } catch (const NumericError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("internal error: {}", e.what());
        return 2;
    }
    return 0;
}

int run(int argc, const char* const* argv)
{
    return run(std::vector<std::string>(argv, argv + argc));
}

} // namespace grape::cli
