// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/wat.hpp"
#include <algorithm>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <string>
#include <unordered_map>

namespace gobi {

namespace {

constexpr size_t max_nesting = 512;

struct Pos
{
    uint32_t line = 1;
    uint32_t column = 1;
};

[[noreturn]] void fail(ParseError::Kind kind, Pos pos, const std::string& msg)
{
    throw ParseError{kind, pos.line, pos.column, msg};
}

[[noreturn]] void syntax(Pos pos, const std::string& msg)
{
    fail(ParseError::Kind::syntax, pos, msg);
}

[[noreturn]] void unsupported(Pos pos, const std::string& msg)
{
    fail(ParseError::Kind::unsupported, pos, msg);
}

enum class TokKind
{
    lparen,
    rparen,
    atom,
    string,
};

struct Token
{
    TokKind kind;
    std::string text;  // atom text, or decoded string bytes
    Pos pos;
};

bool is_idchar(unsigned char c)
{
    if (c >= '0' && c <= '9')
        return true;
    if ((c | 0x20) >= 'a' && (c | 0x20) <= 'z')
        return true;
    switch (c)
    {
    case '!': case '#': case '$': case '%': case '&': case '\'': case '*': case '+':
    case '-': case '.': case '/': case ':': case '<': case '=': case '>': case '?':
    case '@': case '\\': case '^': case '_': case '`': case '|': case '~':
        return true;
    default:
        return false;
    }
}

int hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return c - '0';
    if (c >= 'a' && c <= 'f')
        return c - 'a' + 10;
    if (c >= 'A' && c <= 'F')
        return c - 'A' + 10;
    return -1;
}

class Lexer
{
public:
    explicit Lexer(std::string_view src) : src_{src} {}

    std::vector<Token> tokenize()
    {
        std::vector<Token> out;
        while (true)
        {
            skip_space();
            if (i_ >= src_.size())
                return out;
            const Pos start = pos_;
            const char c = src_[i_];
            if (c == '(')
            {
                advance();
                out.push_back({TokKind::lparen, {}, start});
            }
            else if (c == ')')
            {
                advance();
                out.push_back({TokKind::rparen, {}, start});
            }
            else if (c == '"')
                out.push_back({TokKind::string, read_string(), start});
            else if (is_idchar(static_cast<unsigned char>(c)))
            {
                std::string text;
                while (i_ < src_.size() && is_idchar(static_cast<unsigned char>(src_[i_])))
                {
                    text += src_[i_];
                    advance();
                }
                out.push_back({TokKind::atom, std::move(text), start});
            }
            else
                syntax(start, "unexpected character");
        }
    }

private:
    void advance()
    {
        if (src_[i_] == '\n')
        {
            ++pos_.line;
            pos_.column = 1;
        }
        else
            ++pos_.column;
        ++i_;
    }

    bool at(std::string_view s) const { return src_.substr(i_, s.size()) == s; }

    void skip_space()
    {
        while (i_ < src_.size())
        {
            const char c = src_[i_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
                advance();
            else if (at(";;"))
            {
                while (i_ < src_.size() && src_[i_] != '\n')
                    advance();
            }
            else if (at("(;"))
            {
                const Pos start = pos_;
                size_t depth = 0;
                do
                {
                    if (i_ >= src_.size())
                        syntax(start, "unterminated block comment");
                    if (at("(;"))
                    {
                        ++depth;
                        advance();
                        advance();
                    }
                    else if (at(";)"))
                    {
                        --depth;
                        advance();
                        advance();
                    }
                    else
                        advance();
                } while (depth > 0);
            }
            else
                return;
        }
    }

    std::string read_string()
    {
        const Pos start = pos_;
        advance();  // opening quote
        std::string out;
        while (true)
        {
            if (i_ >= src_.size())
                syntax(start, "unterminated string");
            const char c = src_[i_];
            if (c == '"')
            {
                advance();
                return out;
            }
            if (c == '\n')
                syntax(pos_, "newline in string");
            if (c != '\\')
            {
                out += c;
                advance();
                continue;
            }
            const Pos esc = pos_;
            advance();
            if (i_ >= src_.size())
                syntax(start, "unterminated string");
            const char e = src_[i_];
            switch (e)
            {
            case 't': out += '\t'; advance(); break;
            case 'n': out += '\n'; advance(); break;
            case 'r': out += '\r'; advance(); break;
            case '"': out += '"'; advance(); break;
            case '\'': out += '\''; advance(); break;
            case '\\': out += '\\'; advance(); break;
            case 'u':
            {
                advance();
                if (i_ >= src_.size() || src_[i_] != '{')
                    syntax(esc, "malformed unicode escape");
                advance();
                uint32_t cp = 0;
                size_t digits = 0;
                while (i_ < src_.size() && src_[i_] != '}')
                {
                    const int h = hex_value(src_[i_]);
                    if (h < 0 || ++digits > 6)
                        syntax(esc, "malformed unicode escape");
                    cp = cp * 16 + static_cast<uint32_t>(h);
                    advance();
                }
                if (i_ >= src_.size() || digits == 0 || cp > 0x10ffff ||
                    (cp >= 0xd800 && cp < 0xe000))
                    syntax(esc, "malformed unicode escape");
                advance();
                append_utf8(out, cp);
                break;
            }
            default:
            {
                const int hi = hex_value(e);
                const int lo = i_ + 1 < src_.size() ? hex_value(src_[i_ + 1]) : -1;
                if (hi < 0 || lo < 0)
                    syntax(esc, "unknown escape sequence");
                out += static_cast<char>(hi * 16 + lo);
                advance();
                advance();
            }
            }
        }
    }

    static void append_utf8(std::string& out, uint32_t cp)
    {
        if (cp < 0x80)
            out += static_cast<char>(cp);
        else if (cp < 0x800)
        {
            out += static_cast<char>(0xc0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3f));
        }
        else if (cp < 0x10000)
        {
            out += static_cast<char>(0xe0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            out += static_cast<char>(0x80 | (cp & 0x3f));
        }
        else
        {
            out += static_cast<char>(0xf0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
            out += static_cast<char>(0x80 | (cp & 0x3f));
        }
    }

    std::string_view src_;
    size_t i_ = 0;
    Pos pos_;
};

struct Node
{
    bool is_list = false;
    TokKind kind = TokKind::atom;  // for leaves: atom or string
    std::string text;
    Pos pos;
    std::vector<Node> children;

    bool is_atom() const { return !is_list && kind == TokKind::atom; }
    bool is_string() const { return !is_list && kind == TokKind::string; }
    bool is_id() const { return is_atom() && !text.empty() && text[0] == '$'; }
    bool is_keyword(std::string_view kw) const { return is_atom() && text == kw; }
    /// List whose head atom is `kw`.
    bool is_form(std::string_view kw) const
    {
        return is_list && !children.empty() && children[0].is_keyword(kw);
    }
    std::string_view head() const
    {
        return is_list && !children.empty() && children[0].is_atom() ? std::string_view{children[0].text}
                                                                    : std::string_view{};
    }
};

std::vector<Node> build_tree(std::vector<Token>&& tokens)
{
    std::vector<Node> top;
    std::vector<Node> stack;  // open lists
    for (auto& tok : tokens)
    {
        switch (tok.kind)
        {
        case TokKind::lparen:
            if (stack.size() >= max_nesting)
                syntax(tok.pos, "nesting too deep");
            stack.push_back(Node{true, TokKind::atom, {}, tok.pos, {}});
            break;
        case TokKind::rparen:
        {
            if (stack.empty())
                syntax(tok.pos, "unexpected ')'");
            Node done = std::move(stack.back());
            stack.pop_back();
            (stack.empty() ? top : stack.back().children).push_back(std::move(done));
            break;
        }
        default:
        {
            Node leaf{false, tok.kind, std::move(tok.text), tok.pos, {}};
            (stack.empty() ? top : stack.back().children).push_back(std::move(leaf));
        }
        }
    }
    if (!stack.empty())
        syntax(stack.back().pos, "unclosed list");
    return top;
}

// ---------------------------------------------------------------------------
// Literals

std::string strip_underscores(std::string_view s, bool hex)
{
    std::string out;
    for (size_t i = 0; i < s.size(); ++i)
    {
        if (s[i] != '_')
        {
            out += s[i];
            continue;
        }
        // an underscore must sit between two digits
        auto digit = [&](char c) { return hex ? hex_value(c) >= 0 : (c >= '0' && c <= '9'); };
        if (i == 0 || i + 1 >= s.size() || !digit(s[i - 1]) || !digit(s[i + 1]))
            return {};
    }
    return out;
}

/// Parses an unsigned magnitude in decimal or 0x-hex. Fails on overflow.
std::optional<uint64_t> parse_magnitude(std::string_view s)
{
    bool hex = false;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X'))
    {
        hex = true;
        s.remove_prefix(2);
    }
    if (s.empty())
        return std::nullopt;
    const std::string digits = strip_underscores(s, hex);
    if (digits.empty())
        return std::nullopt;
    uint64_t v = 0;
    for (const char c : digits)
    {
        const int d = hex ? hex_value(c) : (c >= '0' && c <= '9' ? c - '0' : -1);
        if (d < 0)
            return std::nullopt;
        const uint64_t base = hex ? 16 : 10;
        if (v > (std::numeric_limits<uint64_t>::max() - static_cast<uint64_t>(d)) / base)
            return std::nullopt;
        v = v * base + static_cast<uint64_t>(d);
    }
    return v;
}

template <typename U>
std::optional<U> parse_int_literal(std::string_view text)
{
    bool negative = false;
    if (!text.empty() && (text[0] == '+' || text[0] == '-'))
    {
        negative = text[0] == '-';
        text.remove_prefix(1);
    }
    const auto mag = parse_magnitude(text);
    if (!mag)
        return std::nullopt;
    constexpr uint64_t umax = std::numeric_limits<U>::max();
    constexpr uint64_t neg_limit = (umax >> 1) + 1;  // |INT_MIN|
    if (negative)
    {
        if (*mag > neg_limit)
            return std::nullopt;
        return static_cast<U>(U{0} - static_cast<U>(*mag));
    }
    if (*mag > umax)
        return std::nullopt;
    return static_cast<U>(*mag);
}

template <typename F, typename Bits>
std::optional<Bits> parse_float_literal(std::string_view text)
{
    constexpr bool is32 = sizeof(F) == 4;
    constexpr Bits sign_bit = Bits{1} << (sizeof(Bits) * 8 - 1);
    bool negative = false;
    std::string_view body = text;
    if (!body.empty() && (body[0] == '+' || body[0] == '-'))
    {
        negative = body[0] == '-';
        body.remove_prefix(1);
    }
    if (body == "nan")
    {
        const Bits bits = is32 ? Bits{canonical_nan32} : Bits(canonical_nan64);
        return negative ? Bits(bits | sign_bit) : bits;
    }
    if (body == "inf")
    {
        const F v = negative ? -std::numeric_limits<F>::infinity() : std::numeric_limits<F>::infinity();
        return std::bit_cast<Bits>(v);
    }
    if (body.empty())
        return std::nullopt;

    const bool hex = body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X');
    std::string_view digits = hex ? body.substr(2) : body;
    // Validate shape: mantissa digits [. digits] [exp [sign] digits]
    const char exp_char = hex ? 'p' : 'e';
    std::string cleaned = hex ? "0x" : "";
    size_t i = 0;
    auto is_digit = [&](char c) { return hex ? hex_value(c) >= 0 : (c >= '0' && c <= '9'); };
    auto take_digits = [&](bool hexdigits) {
        const size_t start = i;
        while (i < digits.size())
        {
            const char c = digits[i];
            const bool d = hexdigits ? is_digit(c) : (c >= '0' && c <= '9');
            if (d)
            {
                cleaned += c;
                ++i;
            }
            else if (c == '_' && i > start && i + 1 < digits.size() &&
                     (hexdigits ? is_digit(digits[i + 1]) : (digits[i + 1] >= '0' && digits[i + 1] <= '9')))
                ++i;
            else
                break;
        }
        return i > start;
    };
    if (!take_digits(true))
        return std::nullopt;
    if (i < digits.size() && digits[i] == '.')
    {
        cleaned += '.';
        ++i;
        take_digits(true);
    }
    if (i < digits.size() && (digits[i] | 0x20) == exp_char)
    {
        cleaned += exp_char;
        ++i;
        if (i < digits.size() && (digits[i] == '+' || digits[i] == '-'))
            cleaned += digits[i++];
        if (!take_digits(false))
            return std::nullopt;
    }
    if (i != digits.size())
        return std::nullopt;

    errno = 0;
    char* end = nullptr;
    F v;
    if constexpr (is32)
        v = std::strtof(cleaned.c_str(), &end);
    else
        v = std::strtod(cleaned.c_str(), &end);
    if (end != cleaned.c_str() + cleaned.size())
        return std::nullopt;
    if (std::isinf(v))
        return std::nullopt;  // literal out of range
    if (negative)
        v = -v;
    return std::bit_cast<Bits>(v);
}

// ---------------------------------------------------------------------------
// Module builder

/// A name → index map for one index space.
class NameMap
{
public:
    void bind(const Node& id, uint32_t index, std::string_view space)
    {
        if (!map_.emplace(id.text, index).second)
            syntax(id.pos, "duplicate " + std::string{space} + " identifier " + id.text);
    }
    std::optional<uint32_t> find(const std::string& name) const
    {
        if (const auto it = map_.find(name); it != map_.end())
            return it->second;
        return std::nullopt;
    }

private:
    std::unordered_map<std::string, uint32_t> map_;
};

struct Cursor
{
    const std::vector<Node>& items;
    size_t i;
    Pos end_pos;

    bool done() const { return i >= items.size(); }
    const Node& peek() const { return items[i]; }
    const Node* peek_ptr() const { return done() ? nullptr : &items[i]; }
    const Node& next() { return items[i++]; }
    Pos pos() const { return done() ? end_pos : items[i].pos; }
};

class ModuleBuilder
{
public:
    ModuleIR build(const std::vector<Node>& top)
    {
        const std::vector<Node>* fields = &top;
        if (top.size() == 1 && top[0].is_form("module"))
        {
            const auto& m = top[0].children;
            size_t start = 1;
            if (start < m.size() && m[start].is_id())
                ++start;
            if (start < m.size() && (m[start].is_keyword("binary") || m[start].is_keyword("quote")))
                unsupported(m[start].pos, "binary/quote module forms are not supported");
            module_fields_.assign(m.begin() + static_cast<ptrdiff_t>(start), m.end());
            fields = &module_fields_;
        }
        else if (!top.empty() && top[0].is_form("module"))
            syntax(top[1].pos, "unexpected content after module");
        for (const auto& f : *fields)
        {
            if (!f.is_list)
                syntax(f.pos, "expected module field");
            if (f.head().empty())
                syntax(f.pos, "expected module field keyword");
        }

        collect_types(*fields);
        collect_index_spaces(*fields);
        for (const auto& f : *fields)
            build_field(f);
        return std::move(m_);
    }

private:
    // ---- pass 1: explicit types
    void collect_types(const std::vector<Node>& fields)
    {
        for (const auto& f : fields)
        {
            if (f.head() != "type")
                continue;
            Cursor c{f.children, 1, f.pos};
            if (!c.done() && c.peek().is_id())
                type_names_.bind(c.next(), static_cast<uint32_t>(m_.types.size()), "type");
            if (c.done() || !c.peek().is_form("func"))
                syntax(c.pos(), "expected (func ...) in type definition");
            const Node& fn = c.next();
            Cursor fc{fn.children, 1, fn.pos};
            FuncType t;
            parse_params(fc, t, nullptr);
            parse_results(fc, t);
            if (!fc.done())
                syntax(fc.pos(), "unexpected token in function type");
            if (!c.done())
                syntax(c.pos(), "unexpected token in type definition");
            m_.types.push_back(std::move(t));
        }
    }

    // ---- pass 2: assign indices for funcs, tables, memories, globals
    static const Node* inline_import(const Node& f)
    {
        for (size_t i = 1; i < f.children.size(); ++i)
        {
            const auto& ch = f.children[i];
            if (ch.is_form("import"))
                return &ch;
            if (!(ch.is_id() || ch.is_form("export")))
                break;
        }
        return nullptr;
    }

    void collect_index_spaces(const std::vector<Node>& fields)
    {
        // Imports occupy the low indices of each space.
        uint32_t counts[4]{};
        for (const auto& f : fields)
        {
            if (f.head() == "import")
            {
                if (f.children.size() < 4 || !f.children[3].is_list)
                    syntax(f.pos, "malformed import");
                const auto kind = extern_kind(f.children[3]);
                bind_optional_id(f.children[3], kind, counts[static_cast<int>(kind)]++);
            }
            else if (const auto kind = definition_kind(f); kind && inline_import(f))
                bind_optional_id(f, *kind, counts[static_cast<int>(*kind)]++);
        }
        for (const auto& f : fields)
        {
            const auto kind = definition_kind(f);
            if (kind && !inline_import(f))
                bind_optional_id(f, *kind, counts[static_cast<int>(*kind)]++);
        }
    }

    static std::optional<ExternKind> definition_kind(const Node& f)
    {
        const auto h = f.head();
        if (h == "func")
            return ExternKind::func;
        if (h == "table")
            return ExternKind::table;
        if (h == "memory")
            return ExternKind::memory;
        if (h == "global")
            return ExternKind::global;
        return std::nullopt;
    }

    ExternKind extern_kind(const Node& desc)
    {
        const auto k = definition_kind(desc);
        if (!k)
            syntax(desc.pos, "expected import description");
        return *k;
    }

    NameMap& names_for(ExternKind kind)
    {
        switch (kind)
        {
        case ExternKind::func:
            return func_names_;
        case ExternKind::table:
            return table_names_;
        case ExternKind::memory:
            return memory_names_;
        case ExternKind::global:
            return global_names_;
        }
        return func_names_;
    }

    void bind_optional_id(const Node& f, ExternKind kind, uint32_t index)
    {
        field_index_[&f] = index;
        if (f.children.size() > 1 && f.children[1].is_id())
            names_for(kind).bind(f.children[1], index, to_string(kind));
    }

    // ---- pass 3: build fields in order
    void build_field(const Node& f)
    {
        const auto h = f.head();
        if (h == "type")
            return;  // done in pass 1
        if (h == "import")
            return build_import(f);
        if (h == "func")
            return build_func(f);
        if (h == "table")
            return build_table(f);
        if (h == "memory")
            return build_memory(f);
        if (h == "global")
            return build_global(f);
        if (h == "export")
            return build_export(f);
        if (h == "start")
            return build_start(f);
        if (h == "elem")
            return build_elem(f);
        if (h == "data")
            return build_data(f);
        if (h == "rec" || h == "tag")
            unsupported(f.pos, "module field '" + std::string{h} + "' is outside the supported subset");
        syntax(f.pos, "unknown module field '" + std::string{h} + "'");
    }

    std::string expect_string(Cursor& c, const char* what)
    {
        if (c.done() || !c.peek().is_string())
            syntax(c.pos(), std::string{"expected "} + what);
        return c.next().text;
    }

    void skip_id(Cursor& c)
    {
        if (!c.done() && c.peek().is_id())
            c.next();
    }

    /// Collects (export "name") abbreviations; returns the names.
    std::vector<std::string> take_inline_exports(Cursor& c)
    {
        std::vector<std::string> names;
        while (!c.done() && c.peek().is_form("export"))
        {
            const Node& e = c.next();
            if (e.children.size() != 2 || !e.children[1].is_string())
                syntax(e.pos, "malformed inline export");
            names.push_back(e.children[1].text);
        }
        return names;
    }

    std::optional<std::pair<std::string, std::string>> take_inline_import(Cursor& c)
    {
        if (c.done() || !c.peek().is_form("import"))
            return std::nullopt;
        const Node& imp = c.next();
        if (imp.children.size() != 3 || !imp.children[1].is_string() || !imp.children[2].is_string())
            syntax(imp.pos, "malformed inline import");
        return std::pair{imp.children[1].text, imp.children[2].text};
    }

    void add_exports(const std::vector<std::string>& names, ExternKind kind, uint32_t index)
    {
        for (const auto& n : names)
            m_.exports.push_back({n, kind, index});
    }

    ValKind parse_valtype(const Node& n)
    {
        if (n.is_atom())
        {
            if (const auto k = val_kind_from_name(n.text))
                return *k;
            if (n.text == "v128" || n.text == "funcref" || n.text == "externref")
                unsupported(n.pos, "value type " + n.text + " is outside the supported subset");
        }
        syntax(n.pos, "expected value type");
    }

    void parse_params(Cursor& c, FuncType& t, NameMap* local_names)
    {
        while (!c.done() && c.peek().is_form("param"))
        {
            const Node& p = c.next();
            Cursor pc{p.children, 1, p.pos};
            if (!pc.done() && pc.peek().is_id())
            {
                const Node& id = pc.next();
                if (pc.done())
                    syntax(pc.pos(), "expected parameter type");
                if (local_names)
                    local_names->bind(id, static_cast<uint32_t>(t.params.size()), "local");
                t.params.push_back(parse_valtype(pc.next()));
                if (!pc.done())
                    syntax(pc.pos(), "named parameter takes a single type");
                continue;
            }
            while (!pc.done())
                t.params.push_back(parse_valtype(pc.next()));
        }
    }

    void parse_results(Cursor& c, FuncType& t)
    {
        while (!c.done() && c.peek().is_form("result"))
        {
            const Node& r = c.next();
            for (size_t i = 1; i < r.children.size(); ++i)
                t.results.push_back(parse_valtype(r.children[i]));
        }
        if (t.results.size() > 1)
            unsupported(c.pos(), "multiple results are outside the supported subset");
    }

    uint32_t type_index_for(const FuncType& t)
    {
        for (uint32_t i = 0; i < m_.types.size(); ++i)
            if (m_.types[i] == t)
                return i;
        m_.types.push_back(t);
        return static_cast<uint32_t>(m_.types.size() - 1);
    }

    uint32_t resolve(const Node& n, const NameMap& names, std::string_view space)
    {
        if (n.is_id())
        {
            if (const auto idx = names.find(n.text))
                return *idx;
            fail(ParseError::Kind::unknown_identifier, n.pos,
                 "unknown " + std::string{space} + " identifier " + n.text);
        }
        if (n.is_atom())
            if (const auto v = parse_magnitude(n.text); v && *v <= std::numeric_limits<uint32_t>::max())
                return static_cast<uint32_t>(*v);
        syntax(n.pos, "expected " + std::string{space} + " index");
    }

    /// (type x)? (param ...)* (result ...)*; returns the type index.
    uint32_t parse_typeuse(Cursor& c, NameMap* local_names, FuncType* out_type = nullptr)
    {
        std::optional<uint32_t> explicit_index;
        if (!c.done() && c.peek().is_form("type"))
        {
            const Node& tn = c.next();
            if (tn.children.size() != 2)
                syntax(tn.pos, "malformed type use");
            explicit_index = resolve(tn.children[1], type_names_, "type");
        }
        const Pos sig_pos = c.pos();
        FuncType t;
        parse_params(c, t, local_names);
        parse_results(c, t);
        if (explicit_index)
        {
            if (*explicit_index >= m_.types.size())
                syntax(sig_pos, "type index out of range");
            const auto& declared = m_.types[*explicit_index];
            if ((!t.params.empty() || !t.results.empty()) && !(t == declared))
                syntax(sig_pos, "inline signature does not match type use");
            if (out_type)
                *out_type = declared;
            return *explicit_index;
        }
        if (out_type)
            *out_type = t;
        return type_index_for(t);
    }

    Limits parse_limits(Cursor& c, const char* what)
    {
        Limits l;
        auto take = [&]() -> uint32_t {
            const Node& n = c.next();
            const auto v = n.is_atom() ? parse_magnitude(n.text) : std::nullopt;
            if (!v || *v > std::numeric_limits<uint32_t>::max())
                syntax(n.pos, std::string{"expected "} + what + " limit");
            return static_cast<uint32_t>(*v);
        };
        if (c.done() || !c.peek().is_atom() || !parse_magnitude(c.peek().text))
            syntax(c.pos(), std::string{"expected "} + what + " limits");
        l.min = take();
        if (!c.done() && c.peek().is_atom() && parse_magnitude(c.peek().text))
            l.max = take();
        return l;
    }

    GlobalType parse_global_type(Cursor& c)
    {
        if (c.done())
            syntax(c.pos(), "expected global type");
        const Node& n = c.next();
        if (n.is_form("mut"))
        {
            if (n.children.size() != 2)
                syntax(n.pos, "malformed mutable global type");
            return {parse_valtype(n.children[1]), true};
        }
        return {parse_valtype(n), false};
    }

    void build_import(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        Import imp;
        imp.module = expect_string(c, "module name");
        imp.field = expect_string(c, "field name");
        if (c.done() || !c.peek().is_list)
            syntax(c.pos(), "expected import description");
        const Node& desc = c.next();
        if (!c.done())
            syntax(c.pos(), "unexpected token after import description");
        Cursor d{desc.children, 1, desc.pos};
        skip_id(d);
        imp.kind = extern_kind(desc);
        fill_import_desc(imp, d);
        if (!d.done())
            syntax(d.pos(), "unexpected token in import description");
        m_.imports.push_back(std::move(imp));
    }

    void fill_import_desc(Import& imp, Cursor& d)
    {
        switch (imp.kind)
        {
        case ExternKind::func:
            imp.type_index = parse_typeuse(d, nullptr);
            break;
        case ExternKind::table:
            imp.table.limits = parse_limits(d, "table");
            expect_funcref(d);
            break;
        case ExternKind::memory:
            imp.memory.limits = parse_limits(d, "memory");
            break;
        case ExternKind::global:
            imp.global = parse_global_type(d);
            break;
        }
    }

    void expect_funcref(Cursor& c)
    {
        if (c.done())
            syntax(c.pos(), "expected element type");
        const Node& n = c.next();
        if (n.is_keyword("funcref") || n.is_keyword("anyfunc"))
            return;
        if (n.is_keyword("externref"))
            unsupported(n.pos, "externref tables are outside the supported subset");
        syntax(n.pos, "expected funcref");
    }

    void build_func(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        skip_id(c);
        const uint32_t index = field_index_.at(&f);
        const auto exports = take_inline_exports(c);
        const auto import = take_inline_import(c);
        if (import)
        {
            Import imp;
            imp.module = import->first;
            imp.field = import->second;
            imp.kind = ExternKind::func;
            imp.type_index = parse_typeuse(c, nullptr);
            if (!c.done())
                syntax(c.pos(), "imported function cannot have a body");
            add_exports(exports, ExternKind::func, index);
            m_.imports.push_back(std::move(imp));
            return;
        }
        NameMap locals;
        FuncType type;
        FuncDef def;
        def.type_index = parse_typeuse(c, &locals, &type);
        uint32_t local_index = static_cast<uint32_t>(type.params.size());
        while (!c.done() && c.peek().is_form("local"))
        {
            const Node& l = c.next();
            Cursor lc{l.children, 1, l.pos};
            if (!lc.done() && lc.peek().is_id())
            {
                const Node& id = lc.next();
                if (lc.done())
                    syntax(lc.pos(), "expected local type");
                locals.bind(id, local_index++, "local");
                def.locals.push_back(parse_valtype(lc.next()));
                if (!lc.done())
                    syntax(lc.pos(), "named local takes a single type");
                continue;
            }
            while (!lc.done())
            {
                def.locals.push_back(parse_valtype(lc.next()));
                ++local_index;
            }
        }
        add_exports(exports, ExternKind::func, index);
        def.body = parse_body(c, locals);
        m_.functions.push_back(std::move(def));
    }

    void build_table(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        skip_id(c);
        const auto exports = take_inline_exports(c);
        const auto import = take_inline_import(c);
        if (!c.done() && c.peek().is_keyword("funcref") && c.i + 1 < f.children.size() &&
            f.children[c.i + 1].is_form("elem"))
            unsupported(f.pos, "inline table element segments are not supported");
        const Limits limits = parse_limits(c, "table");
        expect_funcref(c);
        if (!c.done())
            syntax(c.pos(), "unexpected token in table");
        if (import)
        {
            Import imp{import->first, import->second, ExternKind::table, 0, TableDef{limits}, {}, {}};
            add_exports(exports, ExternKind::table, 0);
            m_.imports.push_back(std::move(imp));
            return;
        }
        if (m_.table)
            syntax(f.pos, "multiple tables are not allowed");
        m_.table = TableDef{limits};
        add_exports(exports, ExternKind::table, 0);
    }

    void build_memory(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        skip_id(c);
        const auto exports = take_inline_exports(c);
        const auto import = take_inline_import(c);
        if (!c.done() && c.peek().is_form("data"))
            unsupported(c.pos(), "inline memory data is not supported");
        const Limits limits = parse_limits(c, "memory");
        if (!c.done())
            syntax(c.pos(), "unexpected token in memory");
        if (import)
        {
            Import imp{import->first, import->second, ExternKind::memory, 0, {}, MemoryDef{limits}, {}};
            add_exports(exports, ExternKind::memory, 0);
            m_.imports.push_back(std::move(imp));
            return;
        }
        if (m_.memory)
            syntax(f.pos, "multiple memories are not allowed");
        m_.memory = MemoryDef{limits};
        add_exports(exports, ExternKind::memory, 0);
    }

    void build_global(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        skip_id(c);
        const auto exports = take_inline_exports(c);
        const auto import = take_inline_import(c);
        const GlobalType type = parse_global_type(c);
        if (import)
        {
            if (!c.done())
                syntax(c.pos(), "imported global cannot have an initializer");
            add_exports(exports, ExternKind::global, field_index_.at(&f));
            m_.imports.push_back({import->first, import->second, ExternKind::global, 0, {}, {}, type});
            return;
        }
        GlobalDef g{type, parse_const_expr(c, f.pos)};
        if (!c.done())
            syntax(c.pos(), "unexpected token in global");
        m_.globals.push_back(std::move(g));
        add_exports(exports, ExternKind::global, field_index_.at(&f));
    }

    ConstExpr parse_const_expr(Cursor& c, Pos where)
    {
        if (c.done())
            syntax(where, "expected constant expression");
        std::vector<Instr> instrs;
        if (c.peek().is_list && opcode_from_name(c.peek().head()))
        {
            const Node& n = c.next();
            Cursor ic{n.children, 0, n.pos};
            instrs.push_back(parse_plain_instr(ic, nullptr));
            if (!ic.done())
                syntax(ic.pos(), "constant expression takes a single instruction");
        }
        else
        {
            while (!c.done() && c.peek().is_atom() && opcode_from_name(c.peek().text))
                instrs.push_back(parse_plain_instr(c, nullptr));
        }
        if (instrs.size() != 1)
            syntax(where, "constant expression must be a single instruction");
        return ConstExpr{std::move(instrs[0])};
    }

    ConstExpr parse_offset(Cursor& c, Pos where)
    {
        if (!c.done() && c.peek().is_form("offset"))
        {
            const Node& o = c.next();
            Cursor oc{o.children, 1, o.pos};
            auto e = parse_const_expr(oc, o.pos);
            if (!oc.done())
                syntax(oc.pos(), "unexpected token in offset");
            return e;
        }
        if (c.done() || !c.peek().is_list)
            syntax(where, "expected offset expression");
        return parse_const_expr(c, where);
    }

    void build_export(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        Export e;
        e.name = expect_string(c, "export name");
        if (c.done() || !c.peek().is_list)
            syntax(c.pos(), "expected export description");
        const Node& desc = c.next();
        if (!c.done())
            syntax(c.pos(), "unexpected token in export");
        e.kind = extern_kind(desc);
        if (desc.children.size() != 2)
            syntax(desc.pos, "malformed export description");
        e.index = resolve(desc.children[1], names_for(e.kind), to_string(e.kind));
        m_.exports.push_back(std::move(e));
    }

    void build_start(const Node& f)
    {
        if (f.children.size() != 2)
            syntax(f.pos, "malformed start");
        if (m_.start)
            syntax(f.pos, "multiple start functions");
        m_.start = resolve(f.children[1], func_names_, "function");
    }

    void build_elem(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        skip_id(c);
        ElemSegment seg;
        if (!c.done() && c.peek().is_form("table"))
        {
            const Node& t = c.next();
            if (t.children.size() != 2)
                syntax(t.pos, "malformed table use");
            seg.table_index = resolve(t.children[1], table_names_, "table");
        }
        else if (!c.done() && c.peek().is_atom() && !c.peek().is_keyword("func"))
            seg.table_index = resolve(c.next(), table_names_, "table");
        if (!c.done() && c.peek().is_keyword("declare"))
            unsupported(c.pos(), "declarative element segments are not supported");
        seg.offset = parse_offset(c, f.pos);
        if (!c.done() && c.peek().is_keyword("func"))
            c.next();
        while (!c.done())
        {
            const Node& n = c.next();
            if (n.is_list)
                unsupported(n.pos, "element expressions are not supported");
            seg.functions.push_back(resolve(n, func_names_, "function"));
        }
        m_.elements.push_back(std::move(seg));
    }

    void build_data(const Node& f)
    {
        Cursor c{f.children, 1, f.pos};
        skip_id(c);
        DataSegment seg;
        if (!c.done() && c.peek().is_form("memory"))
        {
            const Node& t = c.next();
            if (t.children.size() != 2)
                syntax(t.pos, "malformed memory use");
            seg.memory_index = resolve(t.children[1], memory_names_, "memory");
        }
        else if (!c.done() && c.peek().is_atom())
            seg.memory_index = resolve(c.next(), memory_names_, "memory");
        if (c.done() || c.peek().is_string())
            unsupported(f.pos, "passive data segments are not supported");
        seg.offset = parse_offset(c, f.pos);
        while (!c.done())
        {
            const Node& n = c.next();
            if (!n.is_string())
                syntax(n.pos, "expected data string");
            seg.bytes.insert(seg.bytes.end(), n.text.begin(), n.text.end());
        }
        m_.data.push_back(std::move(seg));
    }

    // ---- function bodies

    struct Label
    {
        std::string name;  // may be empty
    };

    static bool looks_like_instruction(std::string_view name)
    {
        static constexpr std::string_view known[] = {
            "select", "ref.null", "ref.func", "ref.is_null", "return_call", "return_call_indirect",
            "try", "catch", "throw", "rethrow", "delegate", "call_ref", "br_on_null",
        };
        if (std::find(std::begin(known), std::end(known), name) != std::end(known))
            return true;
        return name.find('.') != std::string_view::npos && !name.empty() && name[0] != '$';
    }

    uint32_t parse_label(Cursor& c, const std::vector<Label>& labels)
    {
        if (c.done())
            syntax(c.pos(), "expected label");
        const Node& n = c.next();
        if (n.is_id())
        {
            for (size_t d = 0; d < labels.size(); ++d)
                if (labels[labels.size() - 1 - d].name == n.text)
                    return static_cast<uint32_t>(d);
            fail(ParseError::Kind::unknown_identifier, n.pos, "unknown label " + n.text);
        }
        const auto v = n.is_atom() ? parse_magnitude(n.text) : std::nullopt;
        if (!v || *v > std::numeric_limits<uint32_t>::max())
            syntax(n.pos, "expected label");
        return static_cast<uint32_t>(*v);
    }

    static bool is_label_atom(const Node& n)
    {
        return n.is_id() || (n.is_atom() && parse_magnitude(n.text).has_value());
    }

    std::vector<Instr> parse_body(Cursor& c, const NameMap& locals)
    {
        std::vector<Label> labels;
        std::vector<Instr> body;
        current_locals_ = &locals;
        while (!c.done())
        {
            const Node& n = c.peek();
            if (n.is_list)
            {
                if (opcode_from_name(n.head()) || looks_like_instruction(n.head()))
                    unsupported(n.pos, "folded instructions are not supported");
                if (n.head() == "local" || n.head() == "param" || n.head() == "result")
                    syntax(n.pos, "declaration after the start of the function body");
                syntax(n.pos, "unexpected list in function body");
            }
            if (!n.is_atom())
                syntax(n.pos, "expected instruction");
            const auto op = opcode_from_name(n.text);
            if (!op)
            {
                if (looks_like_instruction(n.text))
                    unsupported(n.pos, "instruction " + n.text + " is outside the supported subset");
                syntax(n.pos, "unknown instruction " + n.text);
            }
            if (*op == Opcode::end)
            {
                c.next();
                if (labels.empty())
                    syntax(n.pos, "unmatched end");
                check_trailing_label(c, labels.back());
                labels.pop_back();
                body.push_back(make_instr(Opcode::end));
                continue;
            }
            if (*op == Opcode::else_)
            {
                c.next();
                if (labels.empty())
                    syntax(n.pos, "unmatched else");
                check_trailing_label(c, labels.back());
                body.push_back(make_instr(Opcode::else_));
                continue;
            }
            body.push_back(parse_plain_instr(c, &labels));
        }
        if (!labels.empty())
            syntax(c.end_pos, "unclosed block in function body");
        body.push_back(make_instr(Opcode::end));
        current_locals_ = nullptr;
        return body;
    }

    void check_trailing_label(Cursor& c, const Label& label)
    {
        if (!c.done() && c.peek().is_id() && !opcode_from_name(c.peek().text))
        {
            const Node& id = c.next();
            if (id.text != label.name)
                syntax(id.pos, "mismatching label " + id.text);
        }
    }

    /// Parses one instruction with its immediates. Block openers push a label
    /// when `labels` is provided.
    Instr parse_plain_instr(Cursor& c, std::vector<Label>* labels)
    {
        const Node& n = c.next();
        if (!n.is_atom())
            syntax(n.pos, "expected instruction");
        const auto op = opcode_from_name(n.text);
        if (!op)
        {
            if (looks_like_instruction(n.text))
                unsupported(n.pos, "instruction " + n.text + " is outside the supported subset");
            syntax(n.pos, "unknown instruction " + n.text);
        }
        Instr in;
        in.op = *op;
        const auto& info = opcode_info(*op);
        switch (info.imm)
        {
        case ImmKind::none:
            if (*op == Opcode::select && !c.done() && c.peek().is_form("result"))
                unsupported(c.pos(), "typed select is outside the supported subset");
            break;
        case ImmKind::block:
        {
            if (!labels)
                syntax(n.pos, "block instruction not allowed here");
            Label label;
            if (!c.done() && c.peek().is_id() && !opcode_from_name(c.peek().text))
                label.name = c.next().text;
            if (!c.done() && (c.peek().is_form("type") || c.peek().is_form("param")))
                unsupported(c.pos(), "block type indices and block parameters are outside the supported subset");
            if (!c.done() && c.peek().is_form("result"))
            {
                const Node& r = c.next();
                if (r.children.size() > 2)
                    unsupported(r.pos, "multiple block results are outside the supported subset");
                if (r.children.size() == 2)
                    in.block.result = parse_valtype(r.children[1]);
            }
            labels->push_back(std::move(label));
            break;
        }
        case ImmKind::label:
            if (!labels)
                syntax(n.pos, "branch not allowed here");
            in.index = parse_label(c, *labels);
            break;
        case ImmKind::br_table:
        {
            if (!labels)
                syntax(n.pos, "branch not allowed here");
            std::vector<uint32_t> all;
            while (!c.done() && is_label_atom(c.peek()))
                all.push_back(parse_label(c, *labels));
            if (all.empty())
                syntax(c.pos(), "br_table requires at least one label");
            in.index = all.back();
            all.pop_back();
            in.targets = std::move(all);
            break;
        }
        case ImmKind::func:
            if (c.done())
                syntax(c.pos(), "expected function index");
            in.index = resolve(c.next(), func_names_, "function");
            break;
        case ImmKind::indirect:
        {
            if (!c.done() && c.peek().is_atom() && is_label_atom(c.peek()))
            {
                const uint32_t table = resolve(c.next(), table_names_, "table");
                if (table != 0)
                    syntax(n.pos, "table index out of range");
            }
            in.index = parse_typeuse(c, nullptr);
            break;
        }
        case ImmKind::local:
        {
            if (c.done())
                syntax(c.pos(), "expected local index");
            static const NameMap empty;
            in.index = resolve(c.next(), current_locals_ ? *current_locals_ : empty, "local");
            break;
        }
        case ImmKind::global:
            if (c.done())
                syntax(c.pos(), "expected global index");
            in.index = resolve(c.next(), global_names_, "global");
            break;
        case ImmKind::memarg:
        {
            in.align = info.natural_align_log2;
            if (!c.done() && c.peek().is_atom() && c.peek().text.starts_with("offset="))
            {
                const Node& o = c.next();
                const auto v = parse_magnitude(std::string_view{o.text}.substr(7));
                if (!v || *v > std::numeric_limits<uint32_t>::max())
                    syntax(o.pos, "malformed memory offset");
                in.offset = static_cast<uint32_t>(*v);
            }
            if (!c.done() && c.peek().is_atom() && c.peek().text.starts_with("align="))
            {
                const Node& a = c.next();
                const auto v = parse_magnitude(std::string_view{a.text}.substr(6));
                if (!v || *v == 0 || !std::has_single_bit(*v) || *v > (uint64_t{1} << 31))
                    syntax(a.pos, "alignment must be a power of two");
                in.align = static_cast<uint32_t>(std::countr_zero(*v));
            }
            break;
        }
        case ImmKind::memory:
            if (!c.done() && c.peek().is_atom() && c.peek().text == "0")
                c.next();
            break;
        case ImmKind::i32:
        {
            const Node& v = expect_atom(c, "i32 literal");
            const auto x = parse_i32_literal(v.text);
            if (!x)
                syntax(v.pos, "malformed i32 literal");
            in.value = *x;
            break;
        }
        case ImmKind::i64:
        {
            const Node& v = expect_atom(c, "i64 literal");
            const auto x = parse_i64_literal(v.text);
            if (!x)
                syntax(v.pos, "malformed i64 literal");
            in.value = *x;
            break;
        }
        case ImmKind::f32:
        {
            const Node& v = expect_atom(c, "f32 literal");
            check_nan_payload(v);
            const auto x = parse_f32_literal(v.text);
            if (!x)
                syntax(v.pos, "malformed f32 literal");
            in.value = *x;
            break;
        }
        case ImmKind::f64:
        {
            const Node& v = expect_atom(c, "f64 literal");
            check_nan_payload(v);
            const auto x = parse_f64_literal(v.text);
            if (!x)
                syntax(v.pos, "malformed f64 literal");
            in.value = *x;
            break;
        }
        }
        return in;
    }

    static void check_nan_payload(const Node& v)
    {
        if (v.text.find("nan:") != std::string::npos)
            unsupported(v.pos, "NaN payload literals are outside the supported subset");
    }

    const Node& expect_atom(Cursor& c, const char* what)
    {
        if (c.done() || !c.peek().is_atom())
            syntax(c.pos(), std::string{"expected "} + what);
        return c.next();
    }

private:
    ModuleIR m_;
    std::vector<Node> module_fields_;
    NameMap type_names_;
    NameMap func_names_;
    NameMap table_names_;
    NameMap memory_names_;
    NameMap global_names_;
    std::unordered_map<const Node*, uint32_t> field_index_;
    const NameMap* current_locals_ = nullptr;
};

}  // namespace

std::optional<uint32_t> parse_i32_literal(std::string_view text) noexcept
{
    return parse_int_literal<uint32_t>(text);
}

std::optional<uint64_t> parse_i64_literal(std::string_view text) noexcept
{
    return parse_int_literal<uint64_t>(text);
}

std::optional<uint32_t> parse_f32_literal(std::string_view text) noexcept
{
    try
    {
        return parse_float_literal<float, uint32_t>(text);
    }
    catch (...)
    {
        return std::nullopt;
    }
}

std::optional<uint64_t> parse_f64_literal(std::string_view text) noexcept
{
    try
    {
        return parse_float_literal<double, uint64_t>(text);
    }
    catch (...)
    {
        return std::nullopt;
    }
}

ModuleIR parse_wat(std::string_view source)
{
    auto tree = build_tree(Lexer{source}.tokenize());
    ModuleBuilder builder;
    return builder.build(tree);
}

}  // namespace gobi
