// Datasets, labels, splitting, the training loop, metrics and PCA export.
#pragma once

#include <grape/embed.hpp>
#include <grape/graph.hpp>
#include <grape/negcn.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace grape {

enum class Task { Binary, Cwe, Severity };
std::string_view to_string(Task t);
std::optional<Task> parse_task(std::string_view s);
std::size_t class_count(Task t);
std::vector<std::string> class_names(Task t);

// ---------------------------------------------------------------- samples

struct Sample {
    std::string id;
    std::filesystem::path mcpg_path;
    bool is_fix = false;
    std::optional<int> cwe; // category index in [0, 7)
    std::optional<double> cvss; // [0, 10]

    bool operator==(const Sample&) const = default;
};

/// Line-delimited JSON, one record per line:
/// {"id":str,"mcpg":path,"label":"fix|nonfix","cwe":int|null,"cvss":float|null}
/// Blank lines and lines starting with '#' are skipped. Relative mcpg paths
/// resolve against `base`. Throws ValidationError naming line and field.
std::vector<Sample> parse_manifest(std::string_view text, const std::filesystem::path& base = {});
std::vector<Sample> read_manifest(const std::filesystem::path& path);
std::string manifest_record(const Sample& s);

enum class Severity { Low, Medium, High, Critical };
std::string_view to_string(Severity s);
/// CVSS v3.0 qualitative bands. Throws BandingError below 0.1, above 10
/// or for NaN.
Severity severity_band(double score);

/// Class index of `s` under `task`, or nullopt when the sample does not
/// take part (non-fixes in the CWE and severity tasks, fixes lacking the
/// needed annotation).
std::optional<std::size_t> task_label(const Sample& s, Task task);

// ---------------------------------------------------------------- split

struct Split {
    std::vector<std::size_t> train; // ascending
    std::vector<std::size_t> test; // ascending
    std::vector<std::string> warnings;
};

/// Stratified seeded split with |train| = round(fraction * n). Every class
/// with at least two members lands in both parts; smaller classes go to
/// train with a warning. Throws ContractError for fewer than five samples.
Split split_dataset(const std::vector<std::size_t>& labels, std::uint64_t seed, double train_fraction = 0.8);

// --------------------------------------------------------------- metrics

/// confusion[true][predicted]
using Confusion = std::vector<std::vector<std::uint64_t>>;

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct MetricsReport {
    Task task = Task::Binary;
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::optional<double> fpr; // binary only
    double mcc = 0;
    std::vector<ClassMetrics> per_class;
    Confusion confusion;
};

/// Binary metrics treat class 1 as positive; multi-class metrics are macro
/// averages with the generalized MCC. Zero denominators give 0. Throws
/// ContractError for non-square, wrongly sized or all-zero confusions.
MetricsReport compute_metrics(const Confusion& confusion, Task task);

/// "metric,value" lines with a leading '#' provenance line.
std::string metrics_csv(const MetricsReport& m, const std::string& header);
std::string metrics_json_value(const MetricsReport& m); // a JSON object

// ------------------------------------------------------------------- PCA

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, eigenvalues
/// descending, eigenvectors in columns with their largest-magnitude entry
/// positive.
std::pair<std::vector<double>, Mat> symmetric_eigen(const Mat& a);

struct PcaResult {
    Mat coords; // n x k
    std::vector<double> variances; // per component, non-increasing
    Mat components; // d x k
};

/// Mean-centers the rows of `x` and projects them on the top k principal
/// axes. Throws ContractError for n < 2 or k > d.
PcaResult pca_project(const Mat& x, std::size_t k = 2);

// -------------------------------------------------------------- training

struct TrainConfig {
    std::size_t hidden = 64;
    std::size_t layers = 3;
    std::size_t batch_size = 32;
    int epochs = 50;
    double lr = 1e-3;
    double weight_decay = 5e-4;
    double lr_gamma = 0.8;
    double dropout = 0.5;
    double pool_ratio = 0.5;
    std::uint64_t seed = 1;
    Task task = Task::Binary;
    int repeats = 1;
    bool no_edge_features = false;
    bool no_type_embedding = false;
    bool sum_aggregation = false;
    GraphStructure graph_structure = GraphStructure::Cpg;
    FeatureReading feature_reading = FeatureReading::Caps;
    SkipGramConfig skipgram;

    /// Throws ContractError for out-of-range values.
    void validate() const;
    EmbedConfig embed_config() const;
    NegcnConfig model_config(std::size_t input_dim) const;
};

struct LabeledGraph {
    Sample sample;
    CodeGraph graph;
    std::size_t label = 0;
};

struct Dataset {
    Task task = Task::Binary;
    std::vector<LabeledGraph> items;
    std::vector<std::string> warnings;
    std::size_t excluded = 0; // samples not taking part in the task
};

/// Loads the MCPG of every sample taking part in `task`. Unreadable or
/// empty graphs are skipped with a warning; throws DegenerateSampleError
/// when nothing usable remains.
Dataset load_dataset(const std::vector<Sample>& samples, Task task);

/// Skip-gram vocabulary over the node sentences of `graphs`.
VocabEmbedding train_vocabulary(const std::vector<const CodeGraph*>& graphs, const SkipGramConfig& config);

struct EpochRecord {
    int epoch = 0;
    double lr = 0;
    double train_loss = 0;
    MetricsReport test;
};

struct RunResult {
    std::uint64_t model_seed = 0;
    std::vector<EpochRecord> history;
    MetricsReport final_test;
    ModelState model;
};

/// Arg-max prediction, ties to the lower class.
std::size_t predict_class(const InferenceModel<double>& model, const GraphInput& input);
Confusion evaluate(const ModelState& model, const std::vector<GraphInput>& inputs,
    const std::vector<std::size_t>& labels, const std::vector<std::size_t>& subset);

/// Seeded training of one model. History holds one record per epoch.
RunResult train_model(const NegcnConfig& model_config, const std::vector<GraphInput>& inputs,
    const std::vector<std::size_t>& labels, const std::vector<std::size_t>& train,
    const std::vector<std::size_t>& test, const TrainConfig& config, std::uint64_t model_seed);

struct Experiment {
    TrainConfig config;
    Split split;
    VocabEmbedding vocab;
    std::vector<RunResult> runs; // the last one is the headline
    std::vector<std::string> warnings;
};

/// Split, vocabulary and embedding are fixed by config.seed; repeats differ
/// only in the model seed.
Experiment run_experiment(const Dataset& data, const TrainConfig& config);

/// Learned representation used for visualization: the MLP hidden
/// activation of every input, one row each.
Mat patch_representations(const ModelState& model, const std::vector<GraphInput>& inputs);

} // namespace grape
