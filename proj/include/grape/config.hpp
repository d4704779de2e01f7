// Flat "key = value" experiment configuration. Lines starting with '#' are
// comments. Unknown keys are rejected so that typos cannot silently fall
// back to defaults.
#pragma once

#include <grape/harness.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace grape {

struct PipelineConfig {
    TrainConfig train;
    std::filesystem::path corpus_dir = "corpus";
    std::filesystem::path vocab_path = "vocab.bin";
    std::filesystem::path model_path = "model.ckpt";
    std::filesystem::path output_dir = "grape-out";
    std::string log_level = "info";
};

struct ConfigKey {
    std::string name;
    std::string doc;
};

/// Every accepted key with a one-line description, in file order.
const std::vector<ConfigKey>& config_keys();

/// Throws ParseError for unknown keys and malformed values.
void set_config_value(PipelineConfig& config, const std::string& key, const std::string& value);
std::string get_config_value(const PipelineConfig& config, const std::string& key);

/// Applies every assignment in `text` on top of `config`. Errors carry the
/// line number.
void apply_config_text(PipelineConfig& config, std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Commented listing of every key with its current value; parses back to
/// the same configuration.
std::string config_to_text(const PipelineConfig& config);

} // namespace grape
