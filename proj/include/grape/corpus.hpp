// Synthetic mini-language patch corpus for demos and end-to-end tests.
//
// Fix patches repair an injected defect (missing bounds check, unsanitized
// command, division by an unchecked length, unclamped product, unescaped
// output, leaked handle, off-by-one loop bound). Non-fix patches are
// behavior-preserving edits: a rename, an operand swap, a constant tweak,
// added logging, or the removal of a duplicated guard or sanitizer call.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace grape {

/// Fix kinds in CWE-index order; the last one is the "other" category.
const std::vector<std::string>& fix_kinds();
const std::vector<std::string>& nonfix_kinds();

struct CorpusConfig {
    std::size_t n = 200;
    std::uint64_t seed = 7;
    std::vector<std::string> defect_kinds; // empty: all fix kinds
    double missing_cvss = 0.1; // fraction of fixes without a score
};

struct GeneratedPatch {
    std::string id;
    std::string kind;
    bool is_fix = false;
    std::optional<int> cwe;
    std::optional<double> cvss;
    std::string buggy;
    std::string fixed;
};

/// Alternates fix / non-fix, starting with a fix. Throws ContractError for
/// n < 10 or unknown defect kinds.
std::vector<GeneratedPatch> generate_patches(const CorpusConfig& config);

/// Writes samples/<id>/{buggy.mini,fixed.mini,patch.diff,mcpg.json} and
/// manifest.jsonl under `dir`; returns the manifest path. `header` becomes
/// the manifest's leading comment line.
std::filesystem::path write_corpus(
    const std::vector<GeneratedPatch>& patches, const std::filesystem::path& dir, const std::string& header);

} // namespace grape
