#include <grape/diff.hpp>
#include <grape/errors.hpp>
#include <grape/harness.hpp>
#include <grape/io.hpp>
#include <grape/random.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace grape {

using json = nlohmann::json;

std::string_view to_string(Task t)
{
    switch (t) {
    case Task::Binary:
        return "binary";
    case Task::Cwe:
        return "cwe";
    case Task::Severity:
        return "severity";
    }
    return "?";
}

std::optional<Task> parse_task(std::string_view s)
{
    for (Task t : { Task::Binary, Task::Cwe, Task::Severity })
        if (s == to_string(t))
            return t;
    return std::nullopt;
}

std::size_t class_count(Task t)
{
    switch (t) {
    case Task::Binary:
        return 2;
    case Task::Cwe:
        return 7;
    case Task::Severity:
        return 4;
    }
    return 0;
}

std::vector<std::string> class_names(Task t)
{
    switch (t) {
    case Task::Binary:
        return { "nonfix", "fix" };
    case Task::Cwe:
        return { "cwe0", "cwe1", "cwe2", "cwe3", "cwe4", "cwe5", "other" };
    case Task::Severity:
        return { "low", "medium", "high", "critical" };
    }
    return {};
}

// ---------------------------------------------------------------- samples

namespace {

Sample parse_record(const std::string& line, int line_no, const std::filesystem::path& base)
{
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ValidationError(where + "not valid JSON (" + e.what() + ")");
    }
    if (!j.is_object())
        throw ValidationError(where + "record is not an object");
    auto text = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string())
            throw ValidationError(where + "field '" + key + "' must be a string");
        return j[key].get<std::string>();
    };
    Sample s;
    s.id = text("id");
    const std::filesystem::path mcpg = text("mcpg");
    s.mcpg_path = mcpg.is_absolute() || base.empty() ? mcpg : base / mcpg;
    const std::string label = text("label");
    if (label != "fix" && label != "nonfix")
        throw ValidationError(where + "field 'label' must be \"fix\" or \"nonfix\"");
    s.is_fix = label == "fix";
    if (j.contains("cwe") && !j["cwe"].is_null()) {
        if (!j["cwe"].is_number_integer() || j["cwe"].get<long long>() < 0 || j["cwe"].get<long long>() >= 7)
            throw ValidationError(where + "field 'cwe' must be an integer in [0, 7) or null");
        s.cwe = j["cwe"].get<int>();
    }
    if (j.contains("cvss") && !j["cvss"].is_null()) {
        if (!j["cvss"].is_number() || !(j["cvss"].get<double>() >= 0 && j["cvss"].get<double>() <= 10))
            throw ValidationError(where + "field 'cvss' must be a number in [0, 10] or null");
        s.cvss = j["cvss"].get<double>();
    }
    if (!s.is_fix && (s.cwe || s.cvss))
        throw ValidationError(where + "fields 'cwe' and 'cvss' are only allowed on fixes");
    return s;
}

} // namespace

std::vector<Sample> parse_manifest(std::string_view text, const std::filesystem::path& base)
{
    std::vector<Sample> out;
    int line_no = 0;
    for (const std::string& line : split_lines(text)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#')
            continue;
        out.push_back(parse_record(line, line_no, base));
    }
    return out;
}

std::vector<Sample> read_manifest(const std::filesystem::path& path)
{
    return parse_manifest(read_text_file(path), path.parent_path());
}

std::string manifest_record(const Sample& s)
{
    json j = json::object();
    j["id"] = s.id;
    j["mcpg"] = s.mcpg_path.generic_string();
    j["label"] = s.is_fix ? "fix" : "nonfix";
    j["cwe"] = s.cwe ? json(*s.cwe) : json(nullptr);
    j["cvss"] = s.cvss ? json(*s.cvss) : json(nullptr);
    return j.dump();
}

std::string_view to_string(Severity s)
{
    static const char* names[] = { "low", "medium", "high", "critical" };
    return names[static_cast<int>(s)];
}

Severity severity_band(double score)
{
    if (!(score >= 0.1 && score <= 10.0))
        throw BandingError("CVSS score " + std::to_string(score) + " is outside the banded range [0.1, 10]");
    if (score < 4.0)
        return Severity::Low;
    if (score < 7.0)
        return Severity::Medium;
    if (score < 9.0)
        return Severity::High;
    return Severity::Critical;
}

std::optional<std::size_t> task_label(const Sample& s, Task task)
{
    switch (task) {
    case Task::Binary:
        return s.is_fix ? 1 : 0;
    case Task::Cwe:
        if (s.is_fix && s.cwe)
            return static_cast<std::size_t>(*s.cwe);
        return std::nullopt;
    case Task::Severity:
        if (s.is_fix && s.cvss)
            return static_cast<std::size_t>(severity_band(*s.cvss));
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------- split

Split split_dataset(const std::vector<std::size_t>& labels, std::uint64_t seed, double train_fraction)
{
    const std::size_t n = labels.size();
    if (n < 5)
        throw ContractError("split_dataset: need at least 5 samples, got " + std::to_string(n));
    if (!(train_fraction > 0 && train_fraction < 1))
        throw ContractError("split_dataset: train fraction must lie in (0, 1)");

    std::map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i)
        members[labels[i]].push_back(i);

    Split out;
    const auto target = static_cast<long long>(std::llround(train_fraction * static_cast<double>(n)));
    std::map<std::size_t, long long> take;
    std::map<std::size_t, double> ideal;
    long long assigned = 0;
    for (const auto& [label, m] : members) {
        const auto size = static_cast<long long>(m.size());
        if (size < 2) {
            out.warnings.push_back("class " + std::to_string(label) + " has a single member; placed in train");
            take[label] = size;
        } else {
            ideal[label] = train_fraction * static_cast<double>(size);
            take[label] = std::clamp(static_cast<long long>(std::floor(ideal[label])), 1LL, size - 1);
        }
        assigned += take[label];
    }
    // Largest remainder towards the exact target, keeping every stratified
    // class in both parts.
    while (assigned != target) {
        const bool grow = assigned < target;
        std::optional<std::size_t> best;
        double best_gap = 0;
        for (const auto& [label, want] : ideal) {
            const auto size = static_cast<long long>(members[label].size());
            if (grow ? take[label] >= size - 1 : take[label] <= 1)
                continue;
            const double gap = grow ? want - static_cast<double>(take[label]) : static_cast<double>(take[label]) - want;
            if (!best || gap > best_gap) {
                best = label;
                best_gap = gap;
            }
        }
        if (!best)
            break;
        take[*best] += grow ? 1 : -1;
        assigned += grow ? 1 : -1;
    }

    Rng rng(seed);
    for (auto& [label, m] : members) {
        shuffle(m, rng);
        const auto k = static_cast<std::size_t>(take[label]);
        out.train.insert(out.train.end(), m.begin(), m.begin() + static_cast<std::ptrdiff_t>(k));
        out.test.insert(out.test.end(), m.begin() + static_cast<std::ptrdiff_t>(k), m.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// --------------------------------------------------------------- metrics

namespace {

double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

double harmonic(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

} // namespace

MetricsReport compute_metrics(const Confusion& confusion, Task task)
{
    const std::size_t c = confusion.size();
    if (c != class_count(task))
        throw ContractError("compute_metrics: " + std::string(to_string(task)) + " needs a "
            + std::to_string(class_count(task)) + "x" + std::to_string(class_count(task)) + " confusion, got "
            + std::to_string(c) + " rows");
    double total = 0, trace = 0;
    std::vector<double> row_sum(c, 0.0), col_sum(c, 0.0);
    for (std::size_t i = 0; i < c; ++i) {
        if (confusion[i].size() != c)
            throw ContractError("compute_metrics: confusion row " + std::to_string(i) + " has the wrong length");
        for (std::size_t j = 0; j < c; ++j) {
            const auto v = static_cast<double>(confusion[i][j]);
            total += v;
            row_sum[i] += v;
            col_sum[j] += v;
            if (i == j)
                trace += v;
        }
    }
    if (total == 0)
        throw ContractError("compute_metrics: empty confusion matrix");

    MetricsReport m;
    m.task = task;
    m.confusion = confusion;
    m.accuracy = trace / total;
    for (std::size_t k = 0; k < c; ++k) {
        const auto tp = static_cast<double>(confusion[k][k]);
        ClassMetrics pc;
        pc.precision = ratio(tp, col_sum[k]);
        pc.recall = ratio(tp, row_sum[k]);
        pc.f1 = harmonic(pc.precision, pc.recall);
        m.per_class.push_back(pc);
    }

    if (task == Task::Binary) {
        const auto tn = static_cast<double>(confusion[0][0]);
        const auto fp = static_cast<double>(confusion[0][1]);
        const auto fn = static_cast<double>(confusion[1][0]);
        const auto tp = static_cast<double>(confusion[1][1]);
        m.precision = m.per_class[1].precision;
        m.recall = m.per_class[1].recall;
        m.f1 = harmonic(m.precision, m.recall);
        m.fpr = ratio(fp, fp + tn);
        m.mcc = ratio(tp * tn - fp * fn, std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)));
        return m;
    }

    for (const ClassMetrics& pc : m.per_class) {
        m.precision += pc.precision / static_cast<double>(c);
        m.recall += pc.recall / static_cast<double>(c);
        m.f1 += pc.f1 / static_cast<double>(c);
    }
    double pt = 0, pp = 0, tt = 0;
    for (std::size_t k = 0; k < c; ++k) {
        pt += col_sum[k] * row_sum[k];
        pp += col_sum[k] * col_sum[k];
        tt += row_sum[k] * row_sum[k];
    }
    m.mcc = ratio(trace * total - pt, std::sqrt((total * total - pp) * (total * total - tt)));
    return m;
}

namespace {

std::string fixed6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace

std::string metrics_csv(const MetricsReport& m, const std::string& header)
{
    std::ostringstream out;
    out << "# " << header << "\n";
    out << "metric,value\n";
    out << "accuracy," << fixed6(m.accuracy) << "\n";
    out << "precision," << fixed6(m.precision) << "\n";
    out << "recall," << fixed6(m.recall) << "\n";
    out << "f1," << fixed6(m.f1) << "\n";
    if (m.fpr)
        out << "fpr," << fixed6(*m.fpr) << "\n";
    out << "mcc," << fixed6(m.mcc) << "\n";
    const auto names = class_names(m.task);
    for (std::size_t k = 0; k < m.per_class.size(); ++k) {
        out << names[k] << "_precision," << fixed6(m.per_class[k].precision) << "\n";
        out << names[k] << "_recall," << fixed6(m.per_class[k].recall) << "\n";
        out << names[k] << "_f1," << fixed6(m.per_class[k].f1) << "\n";
    }
    return out.str();
}

std::string metrics_json_value(const MetricsReport& m)
{
    json j = json::object();
    j["task"] = std::string(to_string(m.task));
    j["accuracy"] = m.accuracy;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["fpr"] = m.fpr ? json(*m.fpr) : json(nullptr);
    j["mcc"] = m.mcc;
    const auto names = class_names(m.task);
    json per = json::array();
    for (std::size_t k = 0; k < m.per_class.size(); ++k)
        per.push_back({ { "class", names[k] }, { "precision", m.per_class[k].precision },
            { "recall", m.per_class[k].recall }, { "f1", m.per_class[k].f1 } });
    j["per_class"] = per;
    j["confusion"] = m.confusion;
    return j.dump();
}

// ------------------------------------------------------------------- PCA

std::pair<std::vector<double>, Mat> symmetric_eigen(const Mat& input)
{
    if (input.rows() != input.cols())
        throw ContractError("symmetric_eigen: matrix is not square");
    const std::size_t d = input.rows();
    Mat a = input;
    Mat v(d, d);
    for (std::size_t i = 0; i < d; ++i)
        v(i, i) = 1;

    double scale = 0;
    for (double x : a.values())
        scale += x * x;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q)
                off += a(p, q) * a(p, q);
        if (off <= 1e-30 * scale || off == 0)
            break;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0;
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    std::vector<double> values(d);
    Mat vectors(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        const std::size_t src = order[j];
        values[j] = a(src, src);
        std::size_t pivot = 0;
        for (std::size_t k = 1; k < d; ++k)
            if (std::abs(v(k, src)) > std::abs(v(pivot, src)))
                pivot = k;
        const double sign = v(pivot, src) < 0 ? -1.0 : 1.0;
        for (std::size_t k = 0; k < d; ++k)
            vectors(k, j) = sign * v(k, src);
    }
    return { values, vectors };
}

PcaResult pca_project(const Mat& x, std::size_t k)
{
    const std::size_t n = x.rows(), d = x.cols();
    if (n < 2)
        throw ContractError("pca_project: need at least 2 vectors");
    if (k > d || k == 0)
        throw ContractError("pca_project: cannot take " + std::to_string(k) + " components of " + std::to_string(d)
            + "-dimensional data");
    Mat centered = x;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i)
            mean += x(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
            centered(i, j) -= mean;
    }
    Mat cov(d, d);
    matmul_tn_acc(centered, centered, cov);
    for (double& c : cov.values())
        c /= static_cast<double>(n - 1);
    auto [values, vectors] = symmetric_eigen(cov);

    PcaResult out;
    out.components = Mat(d, k);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < k; ++j)
            out.components(i, j) = vectors(i, j);
    out.variances.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k));
    for (double& v : out.variances)
        v = std::max(v, 0.0);
    out.coords = matmul(centered, out.components);
    return out;
}

// -------------------------------------------------------------- training

void TrainConfig::validate() const
{
    auto unit = [](double v, const char* name, bool zero_ok) {
        if (!((zero_ok ? v >= 0 : v > 0) && v <= 1))
            throw ContractError(std::string(name) + " must lie in " + (zero_ok ? "[0, 1]" : "(0, 1]") + ", got "
                + std::to_string(v));
    };
    unit(lr, "lr", false);
    unit(lr_gamma, "lr_gamma", false);
    unit(pool_ratio, "pool_ratio", false);
    unit(weight_decay, "weight_decay", true);
    if (!(dropout >= 0 && dropout < 1))
        throw ContractError("dropout must lie in [0, 1), got " + std::to_string(dropout));
    if (batch_size == 0)
        throw ContractError("batch_size must be at least 1");
    if (hidden == 0 || layers == 0)
        throw ContractError("hidden and layers must be positive");
    if (epochs < 0)
        throw ContractError("epochs must be nonnegative");
    if (repeats < 1)
        throw ContractError("repeats must be at least 1");
    if (skipgram.dim <= 0 || skipgram.window <= 0 || skipgram.negatives < 0 || skipgram.epochs <= 0
        || !(skipgram.lr > 0))
        throw ContractError("invalid skip-gram settings");
}

EmbedConfig TrainConfig::embed_config() const
{
    EmbedConfig e;
    e.reading = feature_reading;
    e.no_type_embedding = no_type_embedding;
    e.structure = graph_structure;
    return e;
}

NegcnConfig TrainConfig::model_config(std::size_t input_dim) const
{
    NegcnConfig c;
    c.input_dim = input_dim;
    c.hidden = hidden;
    c.layers = layers;
    c.classes = class_count(task);
    c.pool_ratio = pool_ratio;
    c.dropout = dropout;
    c.edge_features = !no_edge_features;
    c.sum_aggregation = sum_aggregation;
    return c;
}

Dataset load_dataset(const std::vector<Sample>& samples, Task task)
{
    Dataset data;
    data.task = task;
    for (const Sample& s : samples) {
        std::optional<std::size_t> label;
        try {
            label = task_label(s, task);
        } catch (const BandingError& e) {
            data.warnings.push_back("sample " + s.id + " skipped: " + e.what());
            continue;
        }
        if (!label) {
            ++data.excluded;
            continue;
        }
        try {
            CodeGraph g = import_graph_json(s.mcpg_path);
            if (g.nodes.empty()) {
                data.warnings.push_back("sample " + s.id + " skipped: empty MCPG");
                continue;
            }
            data.items.push_back({ s, std::move(g), *label });
        } catch (const Error& e) {
            data.warnings.push_back("sample " + s.id + " skipped: " + e.what());
        }
    }
    if (data.items.empty())
        throw DegenerateSampleError("no usable samples for the " + std::string(to_string(task)) + " task");
    return data;
}

VocabEmbedding train_vocabulary(const std::vector<const CodeGraph*>& graphs, const SkipGramConfig& config)
{
    std::vector<std::vector<std::string>> corpus;
    for (const CodeGraph* g : graphs)
        for (auto& sentence : graph_sentences(*g))
            corpus.push_back(std::move(sentence));
    return train_skipgram(corpus, config);
}

std::size_t predict_class(const InferenceModel<double>& model, const GraphInput& input)
{
    const Mat logits = model.forward(input).logits;
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
        if (logits(0, j) > logits(0, best))
            best = j;
    return best;
}

Confusion evaluate(const ModelState& model, const std::vector<GraphInput>& inputs,
    const std::vector<std::size_t>& labels, const std::vector<std::size_t>& subset)
{
    const std::size_t c = model.config().classes;
    Confusion confusion(c, std::vector<std::uint64_t>(c, 0));
    const InferenceModel<double> plain(model);
    for (std::size_t i : subset)
        ++confusion[labels[i]][predict_class(plain, inputs[i])];
    return confusion;
}

RunResult train_model(const NegcnConfig& model_config, const std::vector<GraphInput>& inputs,
    const std::vector<std::size_t>& labels, const std::vector<std::size_t>& train,
    const std::vector<std::size_t>& test, const TrainConfig& config, std::uint64_t model_seed)
{
    if (train.empty())
        throw ContractError("train_model: empty training set");
    const Task task = config.task;
    RunResult run;
    run.model_seed = model_seed;
    run.model = ModelState(model_config, model_seed);
    Rng rng(derive_seed(model_seed, 1));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = decayed_lr(config.lr, config.lr_gamma, epoch);
        std::vector<std::size_t> order = train;
        shuffle(order, rng);
        double total = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::vector<Example> batch;
            for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
                batch.push_back({ &inputs[order[i]], labels[order[i]] });
            total += loss_and_grads(run.model, batch, config.weight_decay, Mode::Train, &rng)
                * static_cast<double>(batch.size());
            adamax_step(run.model, rec.lr);
        }
        rec.train_loss = total / static_cast<double>(order.size());
        if (!test.empty())
            rec.test = compute_metrics(evaluate(run.model, inputs, labels, test), task);
        run.history.push_back(std::move(rec));
    }
    if (!test.empty())
        run.final_test = run.history.empty() ? compute_metrics(evaluate(run.model, inputs, labels, test), task)
                                             : run.history.back().test;
    return run;
}

Experiment run_experiment(const Dataset& data, const TrainConfig& config)
{
    config.validate();
    if (data.task != config.task)
        throw ContractError("run_experiment: dataset was loaded for a different task");
    Experiment ex;
    ex.config = config;
    std::vector<std::size_t> labels;
    for (const LabeledGraph& item : data.items)
        labels.push_back(item.label);
    ex.split = split_dataset(labels, derive_seed(config.seed, 0));
    ex.warnings = ex.split.warnings;

    std::vector<const CodeGraph*> train_graphs;
    for (std::size_t i : ex.split.train)
        train_graphs.push_back(&data.items[i].graph);
    SkipGramConfig sg = config.skipgram;
    sg.seed = derive_seed(config.seed, 1);
    ex.vocab = train_vocabulary(train_graphs, sg);

    const EmbedConfig ec = config.embed_config();
    const NegcnConfig mc = config.model_config(ec.feature_dim(ex.vocab.dim()));
    std::vector<GraphInput> inputs;
    for (const LabeledGraph& item : data.items)
        inputs.push_back(prepare_input(embed_graph(item.graph, ex.vocab, ec), mc));

    for (int r = 0; r < config.repeats; ++r)
        ex.runs.push_back(train_model(mc, inputs, labels, ex.split.train, ex.split.test, config,
            derive_seed(config.seed, 100 + static_cast<std::uint64_t>(r))));
    return ex;
}

Mat patch_representations(const ModelState& model, const std::vector<GraphInput>& inputs)
{
    const InferenceModel<double> plain(model);
    Mat out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Mat h = plain.forward(inputs[i]).hidden;
        if (i == 0)
            out = Mat(inputs.size(), h.cols());
        std::copy(h.row(0), h.row(0) + h.cols(), out.row(i));
    }
    return out;
}

} // namespace grape
