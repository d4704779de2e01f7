#include <grape/corpus.hpp>
#include <grape/diff.hpp>
#include <grape/errors.hpp>
#include <grape/harness.hpp>
#include <grape/io.hpp>
#include <grape/mcpg.hpp>
#include <grape/random.hpp>

#include <algorithm>
#include <cstdio>
#include <iterator>
#include <regex>
#include <sstream>

namespace grape {

const std::vector<std::string>& fix_kinds()
{
    static const std::vector<std::string> kinds { "bounds-check", "sanitize-command", "zero-check", "clamp-product",
        "escape-output", "release-handle", "loop-bound" };
    return kinds;
}

const std::vector<std::string>& nonfix_kinds()
{
    static const std::vector<std::string> kinds { "rename", "swap-operands", "tweak-constant", "add-logging",
        "drop-duplicate-guard", "drop-duplicate-sanitize" };
    return kinds;
}

namespace {

constexpr double kind_cvss[] = { 7.5, 9.8, 8.8, 6.5, 5.4, 5.9, 3.7 };

const std::vector<std::string> int_pool { "count", "total", "size", "offset", "limit", "depth", "width", "step",
    "mark", "level", "span", "slot" };
const std::vector<std::string> str_pool { "name", "path", "text", "line", "query", "token", "field", "label" };
const std::vector<std::string> messages { "\"start\"", "\"done\"", "\"retry\"", "\"ready\"", "\"tick\"" };

using Lines = std::vector<std::string>;

std::string pick(Rng& rng, const std::vector<std::string>& pool) { return pool[uniform_index(rng, pool.size())]; }

std::string number(Rng& rng, int lo, int hi)
{
    return std::to_string(lo + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1))));
}

void add(Lines& out, int depth, const std::string& text) { out.push_back(std::string(2 * depth, ' ') + text); }

struct Scope {
    std::string buf, idx, cmd, acc, helper;
    std::vector<std::string> ints; // locals and parameters usable as int
    std::vector<std::string> strs;
    std::vector<std::string> unused_ints = int_pool;
    std::vector<std::string> unused_strs = str_pool;

    std::string fresh(Rng& rng, std::vector<std::string>& pool)
    {
        const std::size_t k = uniform_index(rng, pool.size());
        std::string name = pool[k];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
        return name;
    }
};

void filler(Rng& rng, Scope& s, Lines& out)
{
    const std::string v = pick(rng, s.ints);
    switch (uniform_index(rng, s.helper.empty() ? 10 : 11)) {
    case 0:
        if (!s.unused_ints.empty()) {
            const std::string n = s.fresh(rng, s.unused_ints);
            add(out, 1, "int " + n + " = " + number(rng, 0, 50) + ";");
            s.ints.push_back(n);
            break;
        }
        [[fallthrough]];
    case 1:
        add(out, 1, v + " = " + v + " + " + number(rng, 1, 9) + ";");
        break;
    case 2:
        add(out, 1, v + " = " + v + " * " + number(rng, 2, 5) + ";");
        break;
    case 3:
        add(out, 1, "print(" + v + ");");
        break;
    case 4:
        add(out, 1, "log(" + pick(rng, messages) + ");");
        break;
    case 5:
        add(out, 1, "if (" + v + " > " + number(rng, 10, 90) + ") {");
        add(out, 2, v + " = " + v + " - " + number(rng, 1, 9) + ";");
        add(out, 1, "}");
        break;
    case 6:
        add(out, 1, "while (" + v + " < " + number(rng, 10, 90) + ") {");
        add(out, 2, v + " = " + v + " + " + number(rng, 1, 3) + ";");
        add(out, 1, "}");
        break;
    case 7:
        if (!s.unused_strs.empty()) {
            const std::string n = s.fresh(rng, s.unused_strs);
            add(out, 1, "string " + n + " = concat(" + pick(rng, s.strs) + ", " + pick(rng, messages) + ");");
            s.strs.push_back(n);
            break;
        }
        [[fallthrough]];
    case 8: {
        // a guard that is not the one any defect site needs
        std::string w = v, t = pick(rng, s.strs);
        if (w == s.idx && t == s.buf)
            w = s.acc;
        add(out, 1, "if (" + w + " >= len(" + t + ")) {");
        add(out, 2, "return -1;");
        add(out, 1, "}");
        break;
    }
    case 9: {
        std::string t = pick(rng, s.strs);
        if (t == s.cmd)
            t = s.buf;
        add(out, 1, t + " = sanitize(" + t + ");");
        break;
    }
    default:
        add(out, 1, s.acc + " = " + s.acc + " + " + s.helper + "(" + v + ");");
        break;
    }
}

struct Site {
    Lines buggy;
    Lines fixed;
};

Site fix_site(const std::string& kind, Rng& rng, const Scope& s)
{
    Site site;
    Lines& b = site.buggy;
    Lines& f = site.fixed;
    const std::string& acc = s.acc;
    if (kind == "bounds-check") {
        add(f, 1, "if (" + s.idx + " >= len(" + s.buf + ")) {");
        add(f, 2, "return -1;");
        add(f, 1, "}");
        for (Lines* l : { &b, &f }) {
            add(*l, 1, "int item = load(" + s.buf + ", " + s.idx + ");");
            add(*l, 1, acc + " = " + acc + " + item;");
        }
    } else if (kind == "sanitize-command") {
        add(f, 1, s.cmd + " = sanitize(" + s.cmd + ");");
        for (Lines* l : { &b, &f })
            add(*l, 1, "exec(" + s.cmd + ");");
    } else if (kind == "zero-check") {
        for (Lines* l : { &b, &f })
            add(*l, 1, "int n = len(" + s.cmd + ");");
        add(f, 1, "if (n == 0) {");
        add(f, 2, "return 0;");
        add(f, 1, "}");
        const std::string k = number(rng, 10, 500);
        for (Lines* l : { &b, &f }) {
            add(*l, 1, "int quot = " + k + " / n;");
            add(*l, 1, acc + " = " + acc + " + quot;");
        }
    } else if (kind == "clamp-product") {
        const std::string k = number(rng, 100, 4000);
        add(b, 1, "int prod = " + s.idx + " * " + k + ";");
        add(f, 1, "int prod = min(" + s.idx + " * " + k + ", 65535);");
        for (Lines* l : { &b, &f })
            add(*l, 1, acc + " = " + acc + " + prod;");
    } else if (kind == "escape-output") {
        const std::string m = pick(rng, messages);
        add(b, 1, "send(concat(" + m + ", " + s.cmd + "));");
        add(f, 1, "send(escape(concat(" + m + ", " + s.cmd + ")));");
    } else if (kind == "release-handle") {
        for (Lines* l : { &b, &f }) {
            add(*l, 1, "int fd = open(" + s.cmd + ");");
            add(*l, 1, acc + " = " + acc + " + read(fd);");
        }
        add(f, 1, "free(fd);");
    } else if (kind == "loop-bound") {
        for (const auto& [l, op] : { std::pair { &b, "<=" }, std::pair { &f, "<" } }) {
            add(*l, 1, "int k = 0;");
            add(*l, 1, std::string("while (k ") + op + " len(" + s.buf + ")) {");
            add(*l, 2, acc + " = " + acc + " + load(" + s.buf + ", k);");
            add(*l, 2, "k = k + 1;");
            add(*l, 1, "}");
        }
    }
    return site;
}

Site nonfix_site(const std::string& kind, Rng& rng, const Scope& s)
{
    Site site;
    Lines& b = site.buggy;
    Lines& f = site.fixed;
    const std::string& acc = s.acc;
    if (kind == "rename") {
        // the rename itself is applied to the whole function afterwards
        for (Lines* l : { &b, &f })
            add(*l, 1, acc + " = " + acc + " + " + s.idx + ";");
    } else if (kind == "swap-operands") {
        std::vector<std::string> others;
        std::copy_if(s.ints.begin(), s.ints.end(), std::back_inserter(others), [&](const auto& v) { return v != acc; });
        const std::string v = pick(rng, others);
        add(b, 1, acc + " = " + acc + " + " + v + ";");
        add(f, 1, acc + " = " + v + " + " + acc + ";");
    } else if (kind == "tweak-constant") {
        const int k = 2 + static_cast<int>(uniform_index(rng, 60));
        add(b, 1, "int lim = " + std::to_string(k) + ";");
        add(f, 1, "int lim = " + std::to_string(k + 1 + static_cast<int>(uniform_index(rng, 20))) + ";");
        for (Lines* l : { &b, &f })
            add(*l, 1, acc + " = " + acc + " + lim;");
    } else if (kind == "add-logging") {
        add(f, 1, "log(" + pick(rng, messages) + ");");
        for (Lines* l : { &b, &f })
            add(*l, 1, "print(" + acc + ");");
    } else if (kind == "drop-duplicate-guard") {
        const int copies[] = { 2, 1 };
        int which = 0;
        for (Lines* l : { &b, &f }) {
            for (int c = 0; c < copies[which]; ++c) {
                add(*l, 1, "if (" + s.idx + " >= len(" + s.buf + ")) {");
                add(*l, 2, "return -1;");
                add(*l, 1, "}");
            }
            ++which;
            add(*l, 1, "int item = load(" + s.buf + ", " + s.idx + ");");
            add(*l, 1, acc + " = " + acc + " + item;");
        }
    } else if (kind == "drop-duplicate-sanitize") {
        add(b, 1, s.cmd + " = sanitize(" + s.cmd + ");");
        for (Lines* l : { &b, &f }) {
            add(*l, 1, s.cmd + " = sanitize(" + s.cmd + ");");
            add(*l, 1, "exec(" + s.cmd + ");");
        }
    }
    return site;
}

std::string join(const Lines& lines)
{
    std::string out;
    for (const std::string& l : lines)
        out += l + "\n";
    return out;
}

GeneratedPatch make_patch(Rng& rng, std::size_t index, bool is_fix, const std::string& kind, double missing_cvss)
{
    Scope s;
    s.buf = pick(rng, { "buf", "bytes", "arr", "chunk" });
    s.idx = pick(rng, { "idx", "pos", "off", "at" });
    s.cmd = pick(rng, { "cmd", "input", "req", "arg" });
    s.acc = pick(rng, { "acc", "sum", "res", "tally" });
    s.ints = { s.idx, s.acc };
    s.strs = { s.buf, s.cmd };
    const std::string fn = pick(rng, { "handle", "process", "parse", "update", "render", "serve", "lookup" });

    Lines head, prefix, suffix, tail;
    if (uniform01(rng) < 0.5) {
        s.helper = pick(rng, { "scale", "twice", "widen" });
        add(head, 0, "int " + s.helper + "(int p) {");
        add(head, 1, "int q = p * " + number(rng, 2, 9) + ";");
        add(head, 1, "return q;");
        add(head, 0, "}");
        add(head, 0, "");
    }
    add(head, 0, "int " + fn + "(string " + s.buf + ", int " + s.idx + ", string " + s.cmd + ") {");
    add(head, 1, "int " + s.acc + " = " + number(rng, 0, 9) + ";");
    const std::size_t before = 2 + uniform_index(rng, 4), after = 1 + uniform_index(rng, 3);
    for (std::size_t k = 0; k < before; ++k)
        filler(rng, s, prefix);
    const Site site = is_fix ? fix_site(kind, rng, s) : nonfix_site(kind, rng, s);
    for (std::size_t k = 0; k < after; ++k)
        filler(rng, s, suffix);
    add(tail, 1, "return " + s.acc + ";");
    add(tail, 0, "}");

    GeneratedPatch p;
    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", index);
    p.id = id;
    p.kind = kind;
    p.is_fix = is_fix;
    p.buggy = join(head) + join(prefix) + join(site.buggy) + join(suffix) + join(tail);
    p.fixed = join(head) + join(prefix) + join(site.fixed) + join(suffix) + join(tail);
    if (kind == "rename") {
        std::string to = s.unused_ints.empty() ? "renamed" : s.fresh(rng, s.unused_ints);
        p.fixed = std::regex_replace(p.fixed, std::regex("\\b" + s.acc + "\\b"), to);
    }
    if (is_fix) {
        const auto k = static_cast<std::size_t>(
            std::find(fix_kinds().begin(), fix_kinds().end(), kind) - fix_kinds().begin());
        p.cwe = static_cast<int>(k);
        if (uniform01(rng) >= missing_cvss)
            p.cvss = kind_cvss[k];
    }
    return p;
}

} // namespace

std::vector<GeneratedPatch> generate_patches(const CorpusConfig& config)
{
    if (config.n < 10)
        throw ContractError("gen_corpus: need at least 10 samples, got " + std::to_string(config.n));
    std::vector<std::string> kinds = config.defect_kinds.empty() ? fix_kinds() : config.defect_kinds;
    for (const std::string& k : kinds)
        if (std::find(fix_kinds().begin(), fix_kinds().end(), k) == fix_kinds().end())
            throw ContractError("gen_corpus: unknown defect kind '" + k + "'");
    Rng rng(config.seed);
    std::vector<GeneratedPatch> out;
    for (std::size_t i = 0; i < config.n; ++i) {
        const bool is_fix = i % 2 == 0;
        const std::string kind = pick(rng, is_fix ? kinds : nonfix_kinds());
        out.push_back(make_patch(rng, i, is_fix, kind, config.missing_cvss));
    }
    return out;
}

std::filesystem::path write_corpus(
    const std::vector<GeneratedPatch>& patches, const std::filesystem::path& dir, const std::string& header)
{
    std::ostringstream manifest;
    manifest << "# " << header << "\n";
    for (const GeneratedPatch& p : patches) {
        const std::filesystem::path rel = std::filesystem::path("samples") / p.id;
        const std::string file = p.id + ".mini";
        const std::string diff_text = make_unified_diff(p.buggy, p.fixed, file, file);
        write_text_file(dir / rel / "buggy.mini", p.buggy);
        write_text_file(dir / rel / "fixed.mini", p.fixed);
        write_text_file(dir / rel / "patch.diff", diff_text);
        const SourcePair pair = pair_sources({ { file, p.buggy, p.fixed } }, parse_unified_diff(diff_text));
        export_graph_json(build_patch_mcpg(pair), dir / rel / "mcpg.json");

        Sample s;
        s.id = p.id;
        s.mcpg_path = rel / "mcpg.json";
        s.is_fix = p.is_fix;
        s.cwe = p.cwe;
        s.cvss = p.cvss;
        manifest << manifest_record(s) << "\n";
    }
    const std::filesystem::path path = dir / "manifest.jsonl";
    write_text_file(path, manifest.str());
    return path;
}

} // namespace grape
