// Lexer, AST and parser for the mini procedural language that stands in for
// a full Java frontend. Grammar:
//
//   program  := { function }
//   function := type IDENT '(' [ type IDENT { ',' type IDENT } ] ')' block
//   type     := 'int' | 'void' | 'string' | 'bool'
//   stmt     := block | type IDENT [ '=' expr ] ';' | IDENT '=' expr ';'
//             | expr ';' | 'if' '(' expr ')' stmt [ 'else' stmt ]
//             | 'while' '(' expr ')' stmt | 'return' [ expr ] ';'
//   expr     := usual precedence over || && == != < <= > >= + - * / % ! -
//   primary  := INT | STRING | 'true' | 'false' | IDENT [ '(' args ')' ]
//             | '(' expr ')'
//
// Line comments start with "//". Identifiers of the form str<k> in primary
// position are normalized string literals and parse as LITERAL.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace grape::mini {

enum class TokenKind { Identifier, Keyword, Integer, String, Punct, End };

struct Token {
    TokenKind kind;
    std::string text;
    int line;
    int column;
    std::size_t offset; // byte offset of the first character in the source
};

/// Splits source text into tokens. Comments and whitespace are dropped; the
/// trailing End token carries the position one past the input.
std::vector<Token> lex(std::string_view source);

bool is_keyword(std::string_view word);
bool is_type_name(std::string_view word);
/// Library functions that naming normalization leaves untouched.
bool is_builtin(std::string_view name);
/// True for identifiers such as "str3" that stand for normalized string literals.
bool is_normalized_string(std::string_view word);

enum class NodeKind {
    Method,
    Param,
    Block,
    Local,  // typed declaration, optional initializer
    Assign, // IDENT '=' expr
    Call,
    Binary,
    Unary,
    Identifier,
    Literal,
    If,
    While,
    Return,
};

/// One AST node. Children follow a per-kind layout:
///   Method: params..., Block          Param: Identifier
///   Local:  Identifier [, init]       Assign: Identifier, value
///   Call:   args...                   Binary: lhs, rhs    Unary: operand
///   If:     cond, then [, else]       While: cond, body   Return: [value]
struct AstNode {
    NodeKind kind;
    std::string code; // canonical source text of the fragment
    std::string name; // identifier / callee / declared name / operator
    std::string decl_type; // Method return type, Param and Local type
    int line = 0;
    int column = 0;
    std::int64_t id = -1; // graph node id, assigned when lowering to a CPG
    std::vector<AstNode> children;

    bool is_statement() const;
};

/// Kind string used for graph nodes (METHOD, CALL, CONTROL_STRUCTURE, ...).
std::string_view cpg_kind(NodeKind kind);

/// Parses a whole program into one AST per function.
/// Throws ParseError with line/column on syntax errors.
std::vector<AstNode> parse_mini(std::string_view source);

} // namespace grape::mini
