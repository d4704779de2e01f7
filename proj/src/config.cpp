#include <grape/config.hpp>
#include <grape/diff.hpp>
#include <grape/errors.hpp>
#include <grape/io.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <iterator>

namespace grape {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected)
{
    throw ParseError("config key '" + key + "': '" + value + "' is not " + expected);
}

template <class Int>
Int parse_int(const std::string& key, const std::string& value)
{
    Int out {};
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || end != value.data() + value.size())
        bad_value(key, value, "an integer");
    return out;
}

double parse_real(const std::string& key, const std::string& value)
{
    double out = 0;
    const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || end != value.data() + value.size())
        bad_value(key, value, "a number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    bad_value(key, value, "a boolean");
}

std::string real_text(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    // shortest representation that still parses back exactly
    for (int precision = 1; precision <= 17; ++precision) {
        char tmp[32];
        std::snprintf(tmp, sizeof tmp, "%.*g", precision, v);
        double back = 0;
        std::from_chars(tmp, tmp + std::char_traits<char>::length(tmp), back);
        if (back == v)
            return tmp;
    }
    return buf;
}

struct Entry {
    ConfigKey key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

template <class Int>
Entry int_entry(const char* name, const char* doc, Int TrainConfig::*field)
{
    return { { name, doc }, [=](PipelineConfig& c, const std::string& v) { c.train.*field = parse_int<Int>(name, v); },
        [=](const PipelineConfig& c) { return std::to_string(c.train.*field); } };
}

Entry real_entry(const char* name, const char* doc, double TrainConfig::*field)
{
    return { { name, doc }, [=](PipelineConfig& c, const std::string& v) { c.train.*field = parse_real(name, v); },
        [=](const PipelineConfig& c) { return real_text(c.train.*field); } };
}

Entry bool_entry(const char* name, const char* doc, bool TrainConfig::*field)
{
    return { { name, doc }, [=](PipelineConfig& c, const std::string& v) { c.train.*field = parse_bool(name, v); },
        [=](const PipelineConfig& c) { return std::string(c.train.*field ? "true" : "false"); } };
}

Entry path_entry(const char* name, const char* doc, std::filesystem::path PipelineConfig::*field)
{
    return { { name, doc }, [=](PipelineConfig& c, const std::string& v) { c.*field = v; },
        [=](const PipelineConfig& c) { return (c.*field).generic_string(); } };
}

const std::vector<Entry>& entries()
{
    static const std::vector<Entry> table = [] {
        std::vector<Entry> t;
        t.push_back(int_entry("hidden", "hidden width h of every layer", &TrainConfig::hidden));
        t.push_back(int_entry("layers", "number of propagation layers", &TrainConfig::layers));
        t.push_back(int_entry("batch_size", "samples per optimizer step", &TrainConfig::batch_size));
        t.push_back(int_entry("epochs", "passes over the training split", &TrainConfig::epochs));
        t.push_back(real_entry("lr", "initial Adamax learning rate", &TrainConfig::lr));
        t.push_back(real_entry("weight_decay", "L2 coefficient on all parameters", &TrainConfig::weight_decay));
        t.push_back(real_entry("lr_gamma", "per-epoch learning-rate decay factor", &TrainConfig::lr_gamma));
        t.push_back(real_entry("dropout", "dropout rate on the MLP hidden layer", &TrainConfig::dropout));
        t.push_back(real_entry("pool_ratio", "fraction of nodes kept by pooling", &TrainConfig::pool_ratio));
        t.push_back(int_entry("seed", "seed for split, embedding and model", &TrainConfig::seed));
        t.push_back({ { "task", "binary | cwe | severity" },
            [](PipelineConfig& c, const std::string& v) {
                const auto t = parse_task(v);
                if (!t)
                    bad_value("task", v, "one of binary, cwe, severity");
                c.train.task = *t;
            },
            [](const PipelineConfig& c) { return std::string(to_string(c.train.task)); } });
        t.push_back(int_entry("repeats", "independent training runs", &TrainConfig::repeats));
        t.push_back(bool_entry("no_edge_features", "drop the edge term (plain residual GCN)",
            &TrainConfig::no_edge_features));
        t.push_back(bool_entry("no_type_embedding", "zero the node-type half of node features",
            &TrainConfig::no_type_embedding));
        t.push_back(bool_entry("sum_aggregation", "sum instead of mean of incident edge features",
            &TrainConfig::sum_aggregation));
        t.push_back({ { "graph_structure", "AST | DDG+CDG | CPG" },
            [](PipelineConfig& c, const std::string& v) {
                const auto s = parse_graph_structure(v);
                if (!s)
                    bad_value("graph_structure", v, "one of AST, DDG+CDG, CPG");
                c.train.graph_structure = *s;
            },
            [](const PipelineConfig& c) { return std::string(to_string(c.train.graph_structure)); } });
        t.push_back({ { "feature_reading", "caps | dims" },
            [](PipelineConfig& c, const std::string& v) {
                const auto r = parse_feature_reading(v);
                if (!r)
                    bad_value("feature_reading", v, "one of caps, dims");
                c.train.feature_reading = *r;
            },
            [](const PipelineConfig& c) { return std::string(to_string(c.train.feature_reading)); } });
        t.push_back({ { "embed_dim", "skip-gram vector size" },
            [](PipelineConfig& c, const std::string& v) { c.train.skipgram.dim = parse_int<int>("embed_dim", v); },
            [](const PipelineConfig& c) { return std::to_string(c.train.skipgram.dim); } });
        t.push_back({ { "skipgram_window", "skip-gram context window" },
            [](PipelineConfig& c, const std::string& v) {
                c.train.skipgram.window = parse_int<int>("skipgram_window", v);
            },
            [](const PipelineConfig& c) { return std::to_string(c.train.skipgram.window); } });
        t.push_back({ { "skipgram_negatives", "negative samples per pair" },
            [](PipelineConfig& c, const std::string& v) {
                c.train.skipgram.negatives = parse_int<int>("skipgram_negatives", v);
            },
            [](const PipelineConfig& c) { return std::to_string(c.train.skipgram.negatives); } });
        t.push_back({ { "skipgram_epochs", "skip-gram passes over the corpus" },
            [](PipelineConfig& c, const std::string& v) {
                c.train.skipgram.epochs = parse_int<int>("skipgram_epochs", v);
            },
            [](const PipelineConfig& c) { return std::to_string(c.train.skipgram.epochs); } });
        t.push_back({ { "skipgram_lr", "initial skip-gram learning rate" },
            [](PipelineConfig& c, const std::string& v) { c.train.skipgram.lr = parse_real("skipgram_lr", v); },
            [](const PipelineConfig& c) { return real_text(c.train.skipgram.lr); } });
        t.push_back(path_entry("corpus_dir", "where gen-corpus writes", &PipelineConfig::corpus_dir));
        t.push_back(path_entry("vocab_path", "where embed writes the vocabulary", &PipelineConfig::vocab_path));
        t.push_back(path_entry("model_path", "checkpoint file name inside output_dir", &PipelineConfig::model_path));
        t.push_back(path_entry("output_dir", "directory for training outputs", &PipelineConfig::output_dir));
        t.push_back({ { "log_level", "trace | debug | info | warn | error | off" },
            [](PipelineConfig& c, const std::string& v) {
                static const char* levels[] = { "trace", "debug", "info", "warn", "error", "off" };
                if (std::find(std::begin(levels), std::end(levels), v) == std::end(levels))
                    bad_value("log_level", v, "a log level");
                c.log_level = v;
            },
            [](const PipelineConfig& c) { return c.log_level; } });
        return t;
    }();
    return table;
}

const Entry& find_entry(const std::string& key)
{
    for (const Entry& e : entries())
        if (e.key.name == key)
            return e;
    throw ParseError("unknown config key '" + key + "'");
}

} // namespace

const std::vector<ConfigKey>& config_keys()
{
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const Entry& e : entries())
            out.push_back(e.key);
        return out;
    }();
    return keys;
}

void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value)
{
    find_entry(key).set(config, value);
}

std::string get_config_value(const PipelineConfig& config, const std::string& key)
{
    return find_entry(key).get(config);
}

void apply_config_text(PipelineConfig& config, std::string_view text)
{
    int line_no = 0;
    for (const std::string& raw : split_lines(text)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        try {
            set_config_value(config, key, value);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    PipelineConfig config;
    apply_config_text(config, read_text_file(path));
    return config;
}

std::string config_to_text(const PipelineConfig& config)
{
    std::string out;
    for (const Entry& e : entries())
        out += "# " + e.key.doc + "\n" + e.key.name + " = " + e.get(config) + "\n";
    return out;
}

} // namespace grape
