#include <grape/mini.hpp>
#include <grape/normalize.hpp>

namespace grape {

const std::string& NameTable::intern(const std::string& original)
{
    if (auto it = m_forward.find(original); it != m_forward.end())
        return m_entries[it->second].second;
    std::size_t index = m_entries.size();
    m_entries.emplace_back(original, m_prefix + std::to_string(index + 1));
    m_forward.emplace(original, index);
    m_backward.emplace(m_entries.back().second, index);
    return m_entries.back().second;
}

const std::string* NameTable::image_of(const std::string& original) const
{
    auto it = m_forward.find(original);
    return it == m_forward.end() ? nullptr : &m_entries[it->second].second;
}

const std::string* NameTable::original_of(const std::string& image) const
{
    auto it = m_backward.find(image);
    return it == m_backward.end() ? nullptr : &m_entries[it->second].first;
}

namespace {

bool followed_by_paren(const std::vector<mini::Token>& tokens, std::size_t i)
{
    return i + 1 < tokens.size() && tokens[i + 1].kind == mini::TokenKind::Punct && tokens[i + 1].text == "(";
}

} // namespace

std::pair<std::string, NameMap> normalize_names(std::string_view source, NameMap map)
{
    mini::parse_mini(source);
    const auto tokens = mini::lex(source);

    std::string out;
    out.reserve(source.size());
    std::size_t copied = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const mini::Token& tok = tokens[i];
        const std::string* replacement = nullptr;
        if (tok.kind == mini::TokenKind::String) {
            replacement = &map.strings.intern(tok.text);
        } else if (tok.kind == mini::TokenKind::Identifier) {
            if (followed_by_paren(tokens, i)) {
                if (!mini::is_builtin(tok.text) && !map.functions.is_image(tok.text))
                    replacement = &map.functions.intern(tok.text);
            } else if (mini::is_normalized_string(tok.text) && map.strings.is_image(tok.text)) {
                // already a normalized literal
            } else if (!map.variables.is_image(tok.text)) {
                replacement = &map.variables.intern(tok.text);
            }
        }
        if (!replacement)
            continue;
        out.append(source.substr(copied, tok.offset - copied));
        out.append(*replacement);
        copied = tok.offset + tok.text.size();
    }
    out.append(source.substr(copied));
    return { std::move(out), std::move(map) };
}

std::vector<std::string> denormalize_tokens(std::string_view normalized, const NameMap& map)
{
    const auto tokens = mini::lex(normalized);
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const mini::Token& tok = tokens[i];
        if (tok.kind == mini::TokenKind::End)
            break;
        const std::string* original = nullptr;
        if (tok.kind == mini::TokenKind::Identifier) {
            if (followed_by_paren(tokens, i))
                original = map.functions.original_of(tok.text);
            else if ((original = map.strings.original_of(tok.text)) == nullptr)
                original = map.variables.original_of(tok.text);
        }
        out.push_back(original ? *original : tok.text);
    }
    return out;
}

SourcePair pair_sources(std::vector<SourceFile> raw_files, PatchDiff diff)
{
    SourcePair pair;
    pair.diff = std::move(diff);
    NameMap map;
    for (const SourceFile& file : raw_files) {
        auto [text, next] = normalize_names(file.buggy, std::move(map));
        map = std::move(next);
        pair.files.push_back({ file.path, std::move(text), {} });
    }
    for (std::size_t i = 0; i < raw_files.size(); ++i) {
        auto [text, next] = normalize_names(raw_files[i].fixed, std::move(map));
        map = std::move(next);
        pair.files[i].fixed = std::move(text);
    }
    pair.name_map = std::move(map);
    return pair;
}

} // namespace grape
