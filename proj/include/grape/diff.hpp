#pragma once

#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace grape {

struct Hunk {
    int old_start = 0;
    int old_count = 0;
    int new_start = 0;
    int new_count = 0;
    /// Body lines including their leading ' ', '-' or '+' marker.
    std::vector<std::string> lines;
};

/// Changes to one file. Line numbers are 1-based; removed lines index the
/// pre-patch (buggy) file and added lines the post-patch (fixed) file.
struct FileChange {
    std::string path;
    std::set<int> removed_lines;
    std::set<int> added_lines;
    std::vector<Hunk> hunks;
};

struct PatchDiff {
    std::vector<FileChange> files;

    const FileChange* find(std::string_view path) const;
};

/// Parses unified-diff text. One FileChange per ---/+++ header pair; a path
/// listed twice has its changes merged. Throws ParseError on empty input,
/// malformed hunk headers and hunk bodies that disagree with their header.
PatchDiff parse_unified_diff(std::string_view text);

/// (removed, added) line sets for `path`. Throws LookupError for unknown paths.
std::pair<std::set<int>, std::set<int>> changed_lines(const PatchDiff& diff, std::string_view path);

/// Renders a unified diff between two texts with `context` lines of context.
/// Returns an empty string when the texts are identical.
std::string make_unified_diff(std::string_view old_text, std::string_view new_text, const std::string& old_path,
    const std::string& new_path, int context = 3);

std::vector<std::string> split_lines(std::string_view text);

} // namespace grape
