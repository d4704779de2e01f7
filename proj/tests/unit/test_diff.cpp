#include <grape/diff.hpp>
#include <grape/errors.hpp>
#include <grape/mini.hpp>
#include <grape/normalize.hpp>

#include <doctest.h>

#include <random>

using namespace grape;

TEST_CASE("single hunk adding one line")
{
    const char* text = "--- a/f.mini\n"
                       "+++ b/f.mini\n"
                       "@@ -1,1 +1,2 @@\n"
                       " int x;\n"
                       "+int y;\n";
    PatchDiff diff = parse_unified_diff(text);
    REQUIRE(diff.files.size() == 1);
    CHECK(diff.files[0].path == "f.mini");
    CHECK(diff.files[0].added_lines == std::set<int> { 2 });
    CHECK(diff.files[0].removed_lines.empty());
}

TEST_CASE("multi-file patch in git format")
{
    // Shaped like a framework fix touching an interceptor and its test:
    // git preamble lines, two file sections, a context-only line between
    // changes and a replaced line.
    const char* text =
        "diff --git a/core/src/main/java/org/apache/struts2/interceptor/I18nInterceptor.java "
        "b/core/src/main/java/org/apache/struts2/interceptor/I18nInterceptor.java\n"
        "index 1b3c..9f2e 100644\n"
        "--- a/core/src/main/java/org/apache/struts2/interceptor/I18nInterceptor.java\n"
        "+++ b/core/src/main/java/org/apache/struts2/interceptor/I18nInterceptor.java\n"
        "@@ -10,4 +10,6 @@ public class I18nInterceptor\n"
        "   locale = read(param);\n"
        "-  store(session, locale);\n"
        "+  if (check(locale)) {\n"
        "+    store(session, locale);\n"
        "+  }\n"
        "   return locale;\n"
        " }\n"
        "diff --git a/core/src/test/java/I18nInterceptorTest.java b/core/src/test/java/I18nInterceptorTest.java\n"
        "--- a/core/src/test/java/I18nInterceptorTest.java\n"
        "+++ b/core/src/test/java/I18nInterceptorTest.java\n"
        "@@ -3,2 +3,3 @@\n"
        " void t() {\n"
        "+  probe(\"..\");\n"
        " }\n";
    PatchDiff diff = parse_unified_diff(text);
    REQUIRE(diff.files.size() == 2);
    CHECK(diff.files[0].path == "core/src/main/java/org/apache/struts2/interceptor/I18nInterceptor.java");
    CHECK(diff.files[0].removed_lines == std::set<int> { 11 });
    CHECK(diff.files[0].added_lines == std::set<int> { 11, 12, 13 });
    CHECK(diff.files[1].path == "core/src/test/java/I18nInterceptorTest.java");
    CHECK(diff.files[1].removed_lines.empty());
    CHECK(diff.files[1].added_lines == std::set<int> { 4 });
}

TEST_CASE("parse errors")
{
    CHECK_THROWS_AS(parse_unified_diff(""), ParseError);
    CHECK_THROWS_AS(parse_unified_diff("just some text\n"), ParseError);
    try {
        parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,x +1 @@\n foo\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(std::string(e.what()).find("@@ -1,x +1 @@") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,3 +1,3 @@\n a\n"), ParseError);
}

TEST_CASE("no newline marker and deletion of a whole file")
{
    const char* text = "--- a/gone.mini\n"
                       "+++ /dev/null\n"
                       "@@ -1,2 +0,0 @@\n"
                       "-void f() {\n"
                       "-}\n"
                       "\\ No newline at end of file\n";
    PatchDiff diff = parse_unified_diff(text);
    REQUIRE(diff.files.size() == 1);
    CHECK(diff.files[0].path == "gone.mini");
    CHECK(diff.files[0].removed_lines == std::set<int> { 1, 2 });
}

TEST_CASE("changed_lines projection")
{
    PatchDiff diff;
    diff.files.push_back({ "p", { 3 }, { 3, 4 }, {} });
    diff.files.push_back({ "q", {}, { 7 }, {} });
    auto [removed, added] = changed_lines(diff, "p");
    CHECK(removed == std::set<int> { 3 });
    CHECK(added == std::set<int> { 3, 4 });
    auto [r2, a2] = changed_lines(diff, "q");
    CHECK(r2.empty());
    CHECK(a2 == std::set<int> { 7 });
    CHECK_THROWS_AS(changed_lines(diff, "missing"), LookupError);
}

TEST_CASE("generated diffs parse back and satisfy hunk arithmetic")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> word(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::string a, b;
        int n = std::uniform_int_distribution<int>(0, 25)(rng);
        int m = std::uniform_int_distribution<int>(0, 25)(rng);
        for (int i = 0; i < n; ++i)
            a += "line" + std::to_string(word(rng)) + "\n";
        for (int i = 0; i < m; ++i)
            b += "line" + std::to_string(word(rng)) + "\n";
        std::string text = make_unified_diff(a, b, "f", "f", 3);
        if (a == b) {
            CHECK(text.empty());
            continue;
        }
        if (text.empty())
            continue;
        PatchDiff diff = parse_unified_diff(text);
        REQUIRE(diff.files.size() == 1);
        const auto old_lines = split_lines(a);
        const auto new_lines = split_lines(b);
        for (const Hunk& h : diff.files[0].hunks) {
            int pre = 0, post = 0;
            for (const std::string& l : h.lines) {
                pre += l[0] != '+';
                post += l[0] != '-';
            }
            CHECK(post - pre == h.new_count - h.old_count);
        }
        for (int line : diff.files[0].removed_lines)
            CHECK((line >= 1 && line <= static_cast<int>(old_lines.size())));
        for (int line : diff.files[0].added_lines)
            CHECK((line >= 1 && line <= static_cast<int>(new_lines.size())));
        // unchanged lines of b are exactly those not listed as added
        CHECK(new_lines.size() - diff.files[0].added_lines.size() == old_lines.size() - diff.files[0].removed_lines.size());
    }
}

TEST_CASE("naming normalization by first occurrence")
{
    auto [text, map] = normalize_names("void g() { x = helper(\"hi\"); }");
    CHECK(text == "void fun1() { var1 = fun2(str1); }");

    auto [stmt, stmt_map] = normalize_names("void main() {\nx = helper(\"hi\");\n}\n", NameMap {});
    CHECK(stmt.find("var1 = fun2(str1);") != std::string::npos);

    // builtins and keywords untouched; whitespace and lines preserved
    auto [t2, m2] = normalize_names("int main(int count) {\n  print(count);\n  return count + 1;\n}\n");
    CHECK(t2 == "int fun1(int var1) {\n  print(var1);\n  return var1 + 1;\n}\n");
}

TEST_CASE("the statement example from the normalization contract")
{
    // A function body statement is the smallest parsable unit; the name of
    // the enclosing function is a builtin so it does not consume fun1.
    auto [text, map] = normalize_names("void log() { x = helper(\"hi\"); }");
    CHECK(text == "void log() { var1 = fun1(str1); }");
    CHECK(map.functions.entries().size() == 1);
    CHECK(*map.variables.image_of("x") == "var1");
    CHECK(*map.strings.image_of("\"hi\"") == "str1");
}

TEST_CASE("normalization is idempotent and deterministic")
{
    const std::string src = "int process(int idx, string path) {\n"
                            "  int count = idx + 2;\n"
                            "  if (count < len(path)) { write(path, \"log\"); }\n"
                            "  return helper(count, \"log\");\n"
                            "}\n";
    auto [once, map] = normalize_names(src);
    auto [twice, map2] = normalize_names(once, map);
    CHECK(twice == once);
    CHECK(map2 == map);
    auto [again, map3] = normalize_names(src);
    CHECK(again == once);
}

TEST_CASE("shared map normalizes identical identifiers identically")
{
    auto [a, map] = normalize_names("void f() { count = 1; }");
    auto [b, map2] = normalize_names("void f() { total = 2; count = total; }", map);
    CHECK(a == "void fun1() { var1 = 1; }");
    CHECK(b == "void fun1() { var2 = 2; var1 = var2; }");
}

TEST_CASE("parse errors propagate from normalization")
{
    CHECK_THROWS_AS(normalize_names("int f( {"), ParseError);
}

TEST_CASE("inverse map reproduces the original token stream")
{
    std::mt19937_64 rng(5);
    const char* names[] = { "alpha", "beta", "gamma", "delta" };
    const char* funcs[] = { "helper", "compute", "print", "len" };
    const char* strings[] = { "\"a\"", "\"b c\"", "\"\"" };
    for (int trial = 0; trial < 50; ++trial) {
        std::string body;
        for (int i = 0; i < 6; ++i) {
            std::string v = names[rng() % 4];
            std::string f = funcs[rng() % 4];
            std::string s = strings[rng() % 3];
            body += "  " + v + " = " + f + "(" + names[rng() % 4] + ", " + s + ");\n";
        }
        const std::string src = "int run(int alpha) {\n" + body + "  return alpha;\n}\n";
        auto [normalized, map] = normalize_names(src);
        std::vector<std::string> original;
        for (const auto& tok : mini::lex(src))
            if (tok.kind != mini::TokenKind::End)
                original.push_back(tok.text);
        CHECK(denormalize_tokens(normalized, map) == original);

        // injectivity
        for (const NameTable* table : { &map.functions, &map.variables, &map.strings }) {
            std::set<std::string> images;
            for (const auto& [orig, image] : table->entries())
                images.insert(image);
            CHECK(images.size() == table->size());
        }
    }
}

TEST_CASE("pair_sources shares one map across versions")
{
    PatchDiff diff;
    SourcePair pair = pair_sources({ { "a.mini", "void f() { exec(cmd); }", "void f() { cmd = sanitize(cmd); exec(cmd); }" } }, diff);
    CHECK(pair.files[0].buggy == "void fun1() { exec(var1); }");
    CHECK(pair.files[0].fixed == "void fun1() { var1 = sanitize(var1); exec(var1); }");
}
