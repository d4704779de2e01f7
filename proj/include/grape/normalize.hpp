#pragma once

#include <grape/diff.hpp>

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace grape {

/// Injective renaming table for one name category. Images are
/// "<prefix><k>" with k = 1, 2, ... in first-occurrence order.
class NameTable {
public:
    explicit NameTable(std::string prefix = {})
        : m_prefix(std::move(prefix))
    {
    }

    /// Image of `original`, allocating the next index on first sight.
    const std::string& intern(const std::string& original);
    const std::string* image_of(const std::string& original) const;
    const std::string* original_of(const std::string& image) const;
    bool is_image(const std::string& name) const { return original_of(name) != nullptr; }

    std::size_t size() const { return m_entries.size(); }
    /// (original, image) in index order.
    const std::vector<std::pair<std::string, std::string>>& entries() const { return m_entries; }
    const std::string& prefix() const { return m_prefix; }

    bool operator==(const NameTable& other) const { return m_entries == other.m_entries; }

private:
    std::string m_prefix;
    std::vector<std::pair<std::string, std::string>> m_entries;
    std::unordered_map<std::string, std::size_t> m_forward;
    std::unordered_map<std::string, std::size_t> m_backward;
};

struct NameMap {
    NameTable functions { "fun" };
    NameTable variables { "var" };
    NameTable strings { "str" };

    bool operator==(const NameMap&) const = default;
};

/// Renames user-defined functions, variables and string literals in `source`.
/// Keywords, builtins, numbers and operators are preserved, as is all
/// whitespace, so line numbers survive. Names that are already images of
/// `map` are left alone, which makes normalization idempotent.
/// Throws ParseError if `source` is not a valid mini-language program.
std::pair<std::string, NameMap> normalize_names(std::string_view source, NameMap map = {});

/// Token texts of normalized source with every image replaced by its original.
std::vector<std::string> denormalize_tokens(std::string_view normalized, const NameMap& map);

struct SourceFile {
    std::string path;
    std::string buggy;
    std::string fixed;
};

/// Pre/post sources of one patch, normalized under a single shared NameMap.
struct SourcePair {
    std::vector<SourceFile> files;
    PatchDiff diff;
    NameMap name_map;
};

/// Normalizes every file of a patch, buggy versions first, under one map.
SourcePair pair_sources(std::vector<SourceFile> raw_files, PatchDiff diff);

} // namespace grape
