#include <grape/errors.hpp>
#include <grape/mini.hpp>

#include <algorithm>
#include <array>
#include <cctype>

namespace grape::mini {

namespace {

constexpr std::array keywords { "if", "else", "while", "return", "int", "void", "string", "bool", "true", "false" };
constexpr std::array type_names { "int", "void", "string", "bool" };
constexpr std::array builtins {
    "abs", "alloc", "check", "concat", "contains", "copy", "error", "escape", "exec", "format",
    "free", "len", "load", "log", "max", "min", "open", "print", "query", "read",
    "recv", "sanitize", "send", "store", "write",
};

// Two-character operators first so that the longest match wins.
constexpr std::array punctuators { "==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", ",", ";",
    "=", "<", ">", "+", "-", "*", "/", "%", "!" };

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

template <std::size_t N>
bool contains(const std::array<const char*, N>& table, std::string_view word)
{
    return std::any_of(table.begin(), table.end(), [&](const char* entry) { return word == entry; });
}

} // namespace

bool is_keyword(std::string_view word) { return contains(keywords, word); }
bool is_type_name(std::string_view word) { return contains(type_names, word); }
bool is_builtin(std::string_view name) { return contains(builtins, name); }

bool is_normalized_string(std::string_view word)
{
    if (word.size() < 4 || word.substr(0, 3) != "str")
        return false;
    return std::all_of(word.begin() + 3, word.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::vector<Token> lex(std::string_view source)
{
    std::vector<Token> tokens;
    std::size_t pos = 0;
    int line = 1;
    std::size_t line_start = 0;

    auto column = [&](std::size_t at) { return static_cast<int>(at - line_start) + 1; };

    while (pos < source.size()) {
        char c = source[pos];
        if (c == '\n') {
            ++pos;
            ++line;
            line_start = pos;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++pos;
            continue;
        }
        if (c == '/' && pos + 1 < source.size() && source[pos + 1] == '/') {
            while (pos < source.size() && source[pos] != '\n')
                ++pos;
            continue;
        }

        const std::size_t start = pos;
        if (ident_start(c)) {
            while (pos < source.size() && ident_char(source[pos]))
                ++pos;
            std::string word(source.substr(start, pos - start));
            auto kind = is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier;
            tokens.push_back({ kind, std::move(word), line, column(start), start });
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (pos < source.size() && std::isdigit(static_cast<unsigned char>(source[pos])))
                ++pos;
            if (pos < source.size() && ident_char(source[pos]))
                throw ParseError("malformed number", line, column(start));
            tokens.push_back({ TokenKind::Integer, std::string(source.substr(start, pos - start)), line, column(start), start });
            continue;
        }
        if (c == '"') {
            ++pos;
            while (pos < source.size() && source[pos] != '"') {
                if (source[pos] == '\n')
                    throw ParseError("unterminated string literal", line, column(start));
                if (source[pos] == '\\')
                    ++pos;
                ++pos;
            }
            if (pos >= source.size())
                throw ParseError("unterminated string literal", line, column(start));
            ++pos;
            tokens.push_back({ TokenKind::String, std::string(source.substr(start, pos - start)), line, column(start), start });
            continue;
        }

        bool matched = false;
        for (const char* p : punctuators) {
            std::string_view punct(p);
            if (source.substr(pos, punct.size()) == punct) {
                tokens.push_back({ TokenKind::Punct, std::string(punct), line, column(start), start });
                pos += punct.size();
                matched = true;
                break;
            }
        }
        if (!matched)
            throw ParseError(std::string("unexpected character '") + c + "'", line, column(start));
    }
    tokens.push_back({ TokenKind::End, "", line, column(pos), pos });
    return tokens;
}

bool AstNode::is_statement() const
{
    switch (kind) {
    case NodeKind::Local:
    case NodeKind::Assign:
    case NodeKind::Call:
    case NodeKind::If:
    case NodeKind::While:
    case NodeKind::Return:
        return true;
    default:
        return false;
    }
}

std::string_view cpg_kind(NodeKind kind)
{
    switch (kind) {
    case NodeKind::Method:
        return "METHOD";
    case NodeKind::Param:
        return "METHOD_PARAMETER_IN";
    case NodeKind::Block:
        return "BLOCK";
    case NodeKind::Local:
        return "LOCAL";
    case NodeKind::Assign:
    case NodeKind::Call:
    case NodeKind::Binary:
    case NodeKind::Unary:
        return "CALL";
    case NodeKind::Identifier:
        return "IDENTIFIER";
    case NodeKind::Literal:
        return "LITERAL";
    case NodeKind::If:
    case NodeKind::While:
        return "CONTROL_STRUCTURE";
    case NodeKind::Return:
        return "RETURN";
    }
    return "UNKNOWN";
}

namespace {

int precedence(std::string_view op)
{
    if (op == "||")
        return 1;
    if (op == "&&")
        return 2;
    if (op == "==" || op == "!=")
        return 3;
    if (op == "<" || op == "<=" || op == ">" || op == ">=")
        return 4;
    if (op == "+" || op == "-")
        return 5;
    if (op == "*" || op == "/" || op == "%")
        return 6;
    return 0;
}

constexpr int unary_precedence = 7;
constexpr int primary_precedence = 8;

int node_precedence(const AstNode& node)
{
    if (node.kind == NodeKind::Binary)
        return precedence(node.name);
    if (node.kind == NodeKind::Unary)
        return unary_precedence;
    return primary_precedence;
}

std::string wrap(const AstNode& child, bool parens)
{
    return parens ? "(" + child.code + ")" : child.code;
}

class Parser {
public:
    explicit Parser(std::string_view source)
        : m_tokens(lex(source))
    {
    }

    std::vector<AstNode> program()
    {
        std::vector<AstNode> functions;
        while (peek().kind != TokenKind::End)
            functions.push_back(function());
        return functions;
    }

private:
    const Token& peek(std::size_t ahead = 0) const
    {
        return m_tokens[std::min(m_pos + ahead, m_tokens.size() - 1)];
    }

    bool at(std::string_view text) const
    {
        const Token& t = peek();
        return (t.kind == TokenKind::Punct || t.kind == TokenKind::Keyword) && t.text == text;
    }

    [[noreturn]] void fail(const std::string& what, const Token& t) const
    {
        std::string found = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
        throw ParseError(what + ", found " + found, t.line, t.column);
    }

    const Token& expect(std::string_view text)
    {
        if (!at(text))
            fail("expected '" + std::string(text) + "'", peek());
        return m_tokens[m_pos++];
    }

    const Token& expect_identifier()
    {
        if (peek().kind != TokenKind::Identifier)
            fail("expected identifier", peek());
        return m_tokens[m_pos++];
    }

    bool at_type() const { return peek().kind == TokenKind::Keyword && is_type_name(peek().text); }

    const Token& expect_type()
    {
        if (!at_type())
            fail("expected type name", peek());
        return m_tokens[m_pos++];
    }

    static AstNode make(NodeKind kind, const Token& at)
    {
        AstNode node;
        node.kind = kind;
        node.line = at.line;
        node.column = at.column;
        return node;
    }

    static AstNode identifier(const Token& t)
    {
        AstNode node = make(NodeKind::Identifier, t);
        node.name = t.text;
        node.code = t.text;
        return node;
    }

    AstNode function()
    {
        if (!at_type())
            fail("expected function definition", peek());
        const Token& ret = expect_type();
        const Token& name = expect_identifier();
        AstNode method = make(NodeKind::Method, ret);
        method.name = name.text;
        method.decl_type = ret.text;

        expect("(");
        std::string params;
        if (!at(")")) {
            do {
                const Token& type = expect_type();
                const Token& pname = expect_identifier();
                AstNode param = make(NodeKind::Param, type);
                param.decl_type = type.text;
                param.name = pname.text;
                param.code = type.text + " " + pname.text;
                param.children.push_back(identifier(pname));
                if (!params.empty())
                    params += ", ";
                params += param.code;
                method.children.push_back(std::move(param));
            } while (at(",") && (++m_pos, true));
        }
        expect(")");
        method.code = ret.text + " " + name.text + "(" + params + ")";
        if (!at("{"))
            fail("expected '{'", peek());
        method.children.push_back(block());
        return method;
    }

    AstNode block()
    {
        AstNode node = make(NodeKind::Block, expect("{"));
        while (!at("}")) {
            if (peek().kind == TokenKind::End)
                fail("expected '}'", peek());
            node.children.push_back(statement());
        }
        expect("}");
        return node;
    }

    AstNode statement()
    {
        const Token& t = peek();
        if (at("{"))
            return block();
        if (at_type()) {
            const Token& type = expect_type();
            const Token& name = expect_identifier();
            AstNode local = make(NodeKind::Local, type);
            local.decl_type = type.text;
            local.name = name.text;
            local.code = type.text + " " + name.text;
            local.children.push_back(identifier(name));
            if (at("=")) {
                ++m_pos;
                AstNode init = expression();
                local.code += " = " + init.code;
                local.children.push_back(std::move(init));
            }
            expect(";");
            return local;
        }
        if (at("if")) {
            ++m_pos;
            AstNode node = make(NodeKind::If, t);
            expect("(");
            AstNode cond = expression();
            expect(")");
            node.code = "if (" + cond.code + ")";
            node.children.push_back(std::move(cond));
            node.children.push_back(statement());
            if (at("else")) {
                ++m_pos;
                node.children.push_back(statement());
            }
            return node;
        }
        if (at("while")) {
            ++m_pos;
            AstNode node = make(NodeKind::While, t);
            expect("(");
            AstNode cond = expression();
            expect(")");
            node.code = "while (" + cond.code + ")";
            node.children.push_back(std::move(cond));
            node.children.push_back(statement());
            return node;
        }
        if (at("return")) {
            ++m_pos;
            AstNode node = make(NodeKind::Return, t);
            node.code = "return";
            if (!at(";")) {
                AstNode value = expression();
                node.code += " " + value.code;
                node.children.push_back(std::move(value));
            }
            expect(";");
            return node;
        }
        if (t.kind == TokenKind::Identifier && peek(1).kind == TokenKind::Punct && peek(1).text == "=") {
            const Token& target = expect_identifier();
            ++m_pos;
            AstNode node = make(NodeKind::Assign, target);
            node.name = target.text;
            AstNode value = expression();
            node.code = target.text + " = " + value.code;
            node.children.push_back(identifier(target));
            node.children.push_back(std::move(value));
            expect(";");
            return node;
        }
        if (t.kind == TokenKind::Identifier && peek(1).kind == TokenKind::Punct && peek(1).text == "(") {
            AstNode call = expression();
            if (call.kind != NodeKind::Call)
                fail("expected ';' after call statement", peek());
            expect(";");
            return call;
        }
        fail("expected statement", t);
    }

    AstNode expression() { return binary(1); }

    AstNode binary(int min_prec)
    {
        AstNode lhs = unary();
        while (peek().kind == TokenKind::Punct) {
            const Token& op = peek();
            int prec = precedence(op.text);
            if (prec == 0 || prec < min_prec)
                break;
            ++m_pos;
            AstNode rhs = binary(prec + 1);
            AstNode node = make(NodeKind::Binary, op);
            node.line = lhs.line;
            node.column = lhs.column;
            node.name = op.text;
            node.code = wrap(lhs, node_precedence(lhs) < prec) + " " + op.text + " "
                + wrap(rhs, node_precedence(rhs) <= prec);
            node.children.push_back(std::move(lhs));
            node.children.push_back(std::move(rhs));
            lhs = std::move(node);
        }
        return lhs;
    }

    AstNode unary()
    {
        if (at("!") || at("-")) {
            const Token& op = m_tokens[m_pos++];
            AstNode operand = unary();
            AstNode node = make(NodeKind::Unary, op);
            node.name = op.text;
            node.code = op.text + wrap(operand, node_precedence(operand) < unary_precedence);
            node.children.push_back(std::move(operand));
            return node;
        }
        return primary();
    }

    AstNode primary()
    {
        const Token& t = peek();
        switch (t.kind) {
        case TokenKind::Integer:
        case TokenKind::String: {
            ++m_pos;
            AstNode node = make(NodeKind::Literal, t);
            node.code = t.text;
            return node;
        }
        case TokenKind::Keyword:
            if (t.text == "true" || t.text == "false") {
                ++m_pos;
                AstNode node = make(NodeKind::Literal, t);
                node.code = t.text;
                return node;
            }
            break;
        case TokenKind::Identifier: {
            ++m_pos;
            if (at("(")) {
                ++m_pos;
                AstNode call = make(NodeKind::Call, t);
                call.name = t.text;
                std::string args;
                if (!at(")")) {
                    do {
                        AstNode arg = expression();
                        if (!args.empty())
                            args += ", ";
                        args += arg.code;
                        call.children.push_back(std::move(arg));
                    } while (at(",") && (++m_pos, true));
                }
                expect(")");
                call.code = t.text + "(" + args + ")";
                return call;
            }
            if (is_normalized_string(t.text)) {
                AstNode node = make(NodeKind::Literal, t);
                node.code = t.text;
                return node;
            }
            return identifier(t);
        }
        case TokenKind::Punct:
            if (t.text == "(") {
                ++m_pos;
                AstNode inner = expression();
                expect(")");
                return inner;
            }
            break;
        case TokenKind::End:
            break;
        }
        fail("expected expression", t);
    }

    std::vector<Token> m_tokens;
    std::size_t m_pos = 0;
};

} // namespace

std::vector<AstNode> parse_mini(std::string_view source)
{
    return Parser(source).program();
}

} // namespace grape::mini
