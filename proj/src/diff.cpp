#include <grape/diff.hpp>
#include <grape/errors.hpp>

#include <algorithm>
#include <charconv>
#include <sstream>

namespace grape {

std::vector<std::string> split_lines(std::string_view text)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        lines.emplace_back(line);
        start = end + 1;
    }
    return lines;
}

const FileChange* PatchDiff::find(std::string_view path) const
{
    auto it = std::find_if(files.begin(), files.end(), [&](const FileChange& f) { return f.path == path; });
    return it == files.end() ? nullptr : &*it;
}

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

std::string header_path(std::string_view raw, std::string_view strip)
{
    std::size_t tab = raw.find('\t');
    if (tab != std::string_view::npos)
        raw = raw.substr(0, tab);
    while (!raw.empty() && raw.back() == ' ')
        raw.remove_suffix(1);
    if (starts_with(raw, strip))
        raw.remove_prefix(strip.size());
    return std::string(raw);
}

bool parse_number(std::string_view& s, int& out)
{
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr == s.data() || out < 0)
        return false;
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
    return true;
}

bool parse_range(std::string_view& s, char marker, int& start, int& count)
{
    if (s.empty() || s.front() != marker)
        return false;
    s.remove_prefix(1);
    if (!parse_number(s, start))
        return false;
    count = 1;
    if (!s.empty() && s.front() == ',') {
        s.remove_prefix(1);
        if (!parse_number(s, count))
            return false;
    }
    return true;
}

bool parse_hunk_header(std::string_view line, Hunk& hunk)
{
    if (!starts_with(line, "@@ "))
        return false;
    line.remove_prefix(3);
    if (!parse_range(line, '-', hunk.old_start, hunk.old_count))
        return false;
    if (!starts_with(line, " "))
        return false;
    line.remove_prefix(1);
    if (!parse_range(line, '+', hunk.new_start, hunk.new_count))
        return false;
    return starts_with(line, " @@");
}

} // namespace

PatchDiff parse_unified_diff(std::string_view text)
{
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw ParseError("empty diff");

    const std::vector<std::string> lines = split_lines(text);
    PatchDiff diff;
    std::size_t i = 0;
    auto line_no = [](std::size_t index) { return static_cast<int>(index) + 1; };

    while (i < lines.size()) {
        const std::string& line = lines[i];
        if (starts_with(line, "@@"))
            throw ParseError("hunk header outside a file section: '" + line + "'", line_no(i));
        if (!(starts_with(line, "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ "))) {
            ++i;
            continue;
        }

        std::string old_path = header_path(std::string_view(line).substr(4), "a/");
        std::string new_path = header_path(std::string_view(lines[i + 1]).substr(4), "b/");
        std::string path = new_path == "/dev/null" ? old_path : new_path;
        i += 2;

        auto it = std::find_if(diff.files.begin(), diff.files.end(), [&](const FileChange& f) { return f.path == path; });
        if (it == diff.files.end()) {
            diff.files.push_back(FileChange { path, {}, {}, {} });
            it = std::prev(diff.files.end());
        }
        FileChange& file = *it;

        while (i < lines.size() && starts_with(lines[i], "@@")) {
            Hunk hunk;
            if (!parse_hunk_header(lines[i], hunk))
                throw ParseError("malformed hunk header '" + lines[i] + "'", line_no(i));
            const std::size_t header_index = i++;

            int old_left = hunk.old_count;
            int new_left = hunk.new_count;
            int old_line = hunk.old_start;
            int new_line = hunk.new_start;
            while (old_left > 0 || new_left > 0) {
                if (i >= lines.size())
                    throw ParseError("hunk '" + lines[header_index] + "' ends before its declared length", line_no(header_index));
                const std::string& body = lines[i];
                char marker = body.empty() ? ' ' : body.front();
                switch (marker) {
                case '\\':
                    break;
                case ' ':
                    --old_left;
                    --new_left;
                    ++old_line;
                    ++new_line;
                    break;
                case '-':
                    file.removed_lines.insert(old_line++);
                    --old_left;
                    break;
                case '+':
                    file.added_lines.insert(new_line++);
                    --new_left;
                    break;
                default:
                    throw ParseError("unexpected line inside hunk: '" + body + "'", line_no(i));
                }
                if (old_left < 0 || new_left < 0)
                    throw ParseError("hunk '" + lines[header_index] + "' body disagrees with its header", line_no(i));
                if (marker != '\\')
                    hunk.lines.push_back(body.empty() ? std::string(" ") : body);
                ++i;
            }
            while (i < lines.size() && starts_with(lines[i], "\\"))
                ++i;
            file.hunks.push_back(std::move(hunk));
        }
    }

    if (diff.files.empty())
        throw ParseError("no '---'/'+++' file headers found");
    return diff;
}

std::pair<std::set<int>, std::set<int>> changed_lines(const PatchDiff& diff, std::string_view path)
{
    const FileChange* file = diff.find(path);
    if (!file)
        throw LookupError("path not in diff: " + std::string(path));
    return { file->removed_lines, file->added_lines };
}

namespace {

enum class Op { Equal, Delete, Insert };

std::vector<Op> edit_script(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;)
        for (std::size_t j = m; j-- > 0;)
            lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

    std::vector<Op> ops;
    std::size_t i = 0, j = 0;
    while (i < n || j < m) {
        if (i < n && j < m && a[i] == b[j]) {
            ops.push_back(Op::Equal);
            ++i;
            ++j;
        } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
            ops.push_back(Op::Insert);
            ++j;
        } else {
            ops.push_back(Op::Delete);
            ++i;
        }
    }
    // Emit deletions before insertions inside each change block.
    for (std::size_t k = 0; k < ops.size();) {
        if (ops[k] == Op::Equal) {
            ++k;
            continue;
        }
        std::size_t end = k;
        while (end < ops.size() && ops[end] != Op::Equal)
            ++end;
        std::stable_partition(ops.begin() + static_cast<long>(k), ops.begin() + static_cast<long>(end),
            [](Op op) { return op == Op::Delete; });
        k = end;
    }
    return ops;
}

} // namespace

std::string make_unified_diff(std::string_view old_text, std::string_view new_text, const std::string& old_path,
    const std::string& new_path, int context)
{
    const auto a = split_lines(old_text);
    const auto b = split_lines(new_text);
    const auto ops = edit_script(a, b);

    std::vector<std::size_t> changes;
    for (std::size_t k = 0; k < ops.size(); ++k)
        if (ops[k] != Op::Equal)
            changes.push_back(k);
    if (changes.empty())
        return {};

    std::ostringstream out;
    out << "--- a/" << old_path << "\n+++ b/" << new_path << "\n";

    // Positions (in a and b) before each op.
    std::vector<int> pos_a(ops.size() + 1), pos_b(ops.size() + 1);
    for (std::size_t k = 0; k < ops.size(); ++k) {
        pos_a[k + 1] = pos_a[k] + (ops[k] != Op::Insert ? 1 : 0);
        pos_b[k + 1] = pos_b[k] + (ops[k] != Op::Delete ? 1 : 0);
    }

    const auto ctx = static_cast<std::size_t>(context);
    std::size_t c = 0;
    while (c < changes.size()) {
        std::size_t first = changes[c];
        std::size_t last = changes[c];
        while (c + 1 < changes.size() && changes[c + 1] - last <= 2 * ctx + 1)
            last = changes[++c];
        ++c;
        std::size_t begin = first >= ctx ? first - ctx : 0;
        std::size_t end = std::min(ops.size(), last + ctx + 1);

        int old_count = pos_a[end] - pos_a[begin];
        int new_count = pos_b[end] - pos_b[begin];
        int old_start = old_count == 0 ? pos_a[begin] : pos_a[begin] + 1;
        int new_start = new_count == 0 ? pos_b[begin] : pos_b[begin] + 1;
        out << "@@ -" << old_start << "," << old_count << " +" << new_start << "," << new_count << " @@\n";
        for (std::size_t k = begin; k < end; ++k) {
            switch (ops[k]) {
            case Op::Equal:
                out << ' ' << a[static_cast<std::size_t>(pos_a[k])] << '\n';
                break;
            case Op::Delete:
                out << '-' << a[static_cast<std::size_t>(pos_a[k])] << '\n';
                break;
            case Op::Insert:
                out << '+' << b[static_cast<std::size_t>(pos_b[k])] << '\n';
                break;
            }
        }
    }
    return out.str();
}

} // namespace grape
