// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/binary.hpp"
#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <limits>

namespace gobi {

namespace {

constexpr std::array<uint8_t, 4> magic{0x00, 0x61, 0x73, 0x6d};
constexpr std::array<uint8_t, 4> version{0x01, 0x00, 0x00, 0x00};

constexpr uint32_t max_locals = 50000;
constexpr uint8_t funcref_type = 0x70;
constexpr uint8_t func_type_tag = 0x60;
constexpr uint8_t empty_block = 0x40;

enum SectionId : uint8_t
{
    custom = 0,
    type = 1,
    import = 2,
    function = 3,
    table = 4,
    memory = 5,
    global = 6,
    export_ = 7,
    start = 8,
    element = 9,
    code = 10,
    data = 11,
};

class Reader
{
public:
    Reader(std::span<const uint8_t> bytes, size_t base) : bytes_{bytes}, base_{base} {}

    size_t offset() const noexcept { return base_ + pos_; }
    size_t remaining() const noexcept { return bytes_.size() - pos_; }
    bool empty() const noexcept { return pos_ == bytes_.size(); }

    [[noreturn]] void fail(const std::string& msg) const { throw DecodeError{offset(), msg}; }

    uint8_t u8()
    {
        if (empty())
            fail("unexpected end");
        return bytes_[pos_++];
    }

    std::span<const uint8_t> take(size_t n)
    {
        if (n > remaining())
            fail("unexpected end");
        const auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    /// Unsigned LEB128 of at most N bits. Padded encodings are accepted but
    /// unused bits of the last permitted byte must be zero.
    template <unsigned N>
    uint64_t uleb()
    {
        constexpr unsigned max_bytes = (N + 6) / 7;
        uint64_t result = 0;
        for (unsigned i = 0; i < max_bytes; ++i)
        {
            const uint8_t b = u8();
            const unsigned shift = 7 * i;
            if (i == max_bytes - 1)
            {
                const unsigned used = N - shift;
                if ((b & 0x80) != 0)
                    fail("integer representation too long");
                if (used < 7 && (b >> used) != 0)
                    fail("integer too large");
            }
            result |= uint64_t{b & 0x7fu} << shift;
            if ((b & 0x80) == 0)
                return result;
        }
        fail("integer representation too long");
    }

    template <unsigned N>
    int64_t sleb()
    {
        constexpr unsigned max_bytes = (N + 6) / 7;
        uint64_t result = 0;
        unsigned shift = 0;
        for (unsigned i = 0; i < max_bytes; ++i)
        {
            const uint8_t b = u8();
            if (i == max_bytes - 1)
            {
                if ((b & 0x80) != 0)
                    fail("integer representation too long");
                // remaining bits must be a sign extension of bit N-1
                const unsigned used = N - shift;  // meaningful bits in this byte
                if (used < 7)
                {
                    // bits [used - 1, 7) must all be equal
                    const uint8_t high = static_cast<uint8_t>(b & 0x7f) >> (used - 1);
                    const uint8_t all = static_cast<uint8_t>(0x7f >> (used - 1));
                    if (high != 0 && high != all)
                        fail("integer too large");
                }
            }
            result |= uint64_t{b & 0x7fu} << shift;
            shift += 7;
            if ((b & 0x80) == 0)
            {
                if (shift < 64 && (b & 0x40) != 0)
                    result |= ~uint64_t{0} << shift;
                return static_cast<int64_t>(result);
            }
        }
        fail("integer representation too long");
    }

    uint32_t u32() { return static_cast<uint32_t>(uleb<32>()); }

    /// Vector length; each element needs at least `min_elem_size` bytes.
    uint32_t count(size_t min_elem_size = 1)
    {
        const uint32_t n = u32();
        if (min_elem_size != 0 && n > remaining() / min_elem_size)
            fail("length out of bounds");
        return n;
    }

    std::string name()
    {
        const uint32_t n = u32();
        const auto b = take(n);
        return std::string{b.begin(), b.end()};
    }

private:
    std::span<const uint8_t> bytes_;
    size_t base_;
    size_t pos_ = 0;
};

ValKind read_valtype(Reader& r)
{
    const uint8_t b = r.u8();
    switch (b)
    {
    case 0x7f:
    case 0x7e:
    case 0x7d:
    case 0x7c:
        return static_cast<ValKind>(b);
    default:
        r.fail("invalid value type");
    }
}

Limits read_limits(Reader& r)
{
    const uint8_t flag = r.u8();
    Limits l;
    if (flag == 0x00)
        l.min = r.u32();
    else if (flag == 0x01)
    {
        l.min = r.u32();
        l.max = r.u32();
    }
    else
        r.fail("invalid limits flag");
    return l;
}

GlobalType read_global_type(Reader& r)
{
    GlobalType g;
    g.kind = read_valtype(r);
    const uint8_t m = r.u8();
    if (m > 1)
        r.fail("invalid mutability");
    g.mutable_ = m == 1;
    return g;
}

TableDef read_table_type(Reader& r)
{
    if (r.u8() != funcref_type)
        r.fail("invalid table element type");
    return TableDef{read_limits(r)};
}

/// Reads one instruction (opcode already consumed into `in.op`).
void read_immediates(Reader& r, Instr& in)
{
    const auto& info = opcode_info(in.op);
    switch (info.imm)
    {
    case ImmKind::none:
        break;
    case ImmKind::block:
    {
        const uint8_t b = r.u8();
        if (b == empty_block)
            break;
        if (b == 0x7f || b == 0x7e || b == 0x7d || b == 0x7c)
            in.block.result = static_cast<ValKind>(b);
        else
            r.fail("unsupported block type");
        break;
    }
    case ImmKind::label:
    case ImmKind::func:
    case ImmKind::local:
    case ImmKind::global:
        in.index = r.u32();
        break;
    case ImmKind::br_table:
    {
        const uint32_t n = r.count();
        in.targets.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
            in.targets.push_back(r.u32());
        in.index = r.u32();
        break;
    }
    case ImmKind::indirect:
        in.index = r.u32();
        if (r.u8() != 0)
            r.fail("zero byte expected");
        break;
    case ImmKind::memarg:
        in.align = r.u32();
        in.offset = r.u32();
        break;
    case ImmKind::memory:
        if (r.u8() != 0)
            r.fail("zero byte expected");
        break;
    case ImmKind::i32:
        in.value = static_cast<uint32_t>(static_cast<int32_t>(r.sleb<32>()));
        break;
    case ImmKind::i64:
        in.value = static_cast<uint64_t>(r.sleb<64>());
        break;
    case ImmKind::f32:
    {
        const auto b = r.take(4);
        uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | b[static_cast<size_t>(i)];
        in.value = v;
        break;
    }
    case ImmKind::f64:
    {
        const auto b = r.take(8);
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i)
            v = (v << 8) | b[static_cast<size_t>(i)];
        in.value = v;
        break;
    }
    }
}

Opcode read_opcode(Reader& r)
{
    const size_t at = r.offset();
    const uint8_t b = r.u8();
    if (opcode_info(b).name.empty())
    {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "0x%02x", b);
        throw DecodeError{at, std::string{"unsupported opcode "} + buf};
    }
    return static_cast<Opcode>(b);
}

ConstExpr read_const_expr(Reader& r)
{
    ConstExpr e;
    e.instr.op = read_opcode(r);
    read_immediates(r, e.instr);
    if (r.u8() != static_cast<uint8_t>(Opcode::end))
        r.fail("constant expression must be a single instruction");
    return e;
}

std::vector<Instr> read_body(Reader& r)
{
    std::vector<Instr> body;
    uint32_t depth = 0;
    while (true)
    {
        Instr in;
        in.op = read_opcode(r);
        read_immediates(r, in);
        const Opcode op = in.op;
        body.push_back(std::move(in));
        if (op == Opcode::block || op == Opcode::loop || op == Opcode::if_)
            ++depth;
        else if (op == Opcode::end)
        {
            if (depth == 0)
                break;
            --depth;
        }
    }
    if (!r.empty())
        r.fail("section size mismatch");
    return body;
}

class Decoder
{
public:
    explicit Decoder(std::span<const uint8_t> bytes) : bytes_{bytes} {}

    ModuleIR decode()
    {
        if (bytes_.size() < 4 || !std::equal(magic.begin(), magic.end(), bytes_.begin()))
            throw DecodeError{0, "bad magic"};
        if (bytes_.size() < 8 || !std::equal(version.begin(), version.end(), bytes_.begin() + 4))
            throw DecodeError{4, "bad version"};

        Reader r{bytes_.subspan(8), 8};
        uint8_t last_id = 0;
        std::vector<uint32_t> func_types;
        bool saw_code = false;
        while (!r.empty())
        {
            const size_t section_start = r.offset();
            const uint8_t id = r.u8();
            const uint32_t size = r.u32();
            if (size > r.remaining())
                throw DecodeError{section_start, "truncated section"};
            const size_t content_offset = r.offset();
            Reader s{r.take(size), content_offset};

            if (id == custom)
            {
                CustomSection c;
                c.name = s.name();
                const auto rest = s.take(s.remaining());
                c.bytes.assign(rest.begin(), rest.end());
                c.after_section = last_id;
                m_.customs.push_back(std::move(c));
                continue;
            }
            if (id > data)
                throw DecodeError{section_start, "unknown section id " + std::to_string(id)};
            if (id <= last_id)
                throw DecodeError{section_start, "section out of order"};
            last_id = id;

            switch (id)
            {
            case type:
                read_types(s);
                break;
            case import:
                read_imports(s);
                break;
            case function:
            {
                const uint32_t n = s.count();
                for (uint32_t i = 0; i < n; ++i)
                {
                    const uint32_t t = s.u32();
                    if (t >= m_.types.size())
                        s.fail("type index out of range");
                    func_types.push_back(t);
                }
                break;
            }
            case table:
            {
                const uint32_t n = s.count();
                if (n > 1)
                    s.fail("multiple tables");
                if (n == 1)
                    m_.table = read_table_type(s);
                break;
            }
            case memory:
            {
                const uint32_t n = s.count();
                if (n > 1)
                    s.fail("multiple memories");
                if (n == 1)
                    m_.memory = MemoryDef{read_limits(s)};
                break;
            }
            case global:
            {
                const uint32_t n = s.count(2);
                for (uint32_t i = 0; i < n; ++i)
                {
                    GlobalDef g;
                    g.type = read_global_type(s);
                    g.init = read_const_expr(s);
                    m_.globals.push_back(std::move(g));
                }
                break;
            }
            case export_:
            {
                const uint32_t n = s.count(3);
                for (uint32_t i = 0; i < n; ++i)
                {
                    Export e;
                    e.name = s.name();
                    const uint8_t k = s.u8();
                    if (k > 3)
                        s.fail("invalid export kind");
                    e.kind = static_cast<ExternKind>(k);
                    e.index = s.u32();
                    m_.exports.push_back(std::move(e));
                }
                break;
            }
            case start:
                m_.start = s.u32();
                break;
            case element:
            {
                const uint32_t n = s.count(3);
                for (uint32_t i = 0; i < n; ++i)
                {
                    ElemSegment e;
                    e.table_index = s.u32();
                    if (e.table_index != 0)
                        s.fail("unsupported element segment kind");
                    e.offset = read_const_expr(s);
                    const uint32_t k = s.count();
                    for (uint32_t j = 0; j < k; ++j)
                        e.functions.push_back(s.u32());
                    m_.elements.push_back(std::move(e));
                }
                break;
            }
            case code:
            {
                saw_code = true;
                const uint32_t n = s.count();
                if (n != func_types.size())
                    s.fail("function and code section have inconsistent lengths");
                for (uint32_t i = 0; i < n; ++i)
                {
                    const uint32_t body_size = s.u32();
                    if (body_size > s.remaining())
                        s.fail("truncated function body");
                    const size_t at = s.offset();
                    Reader b{s.take(body_size), at};
                    FuncDef f;
                    f.type_index = func_types[i];
                    read_locals(b, f);
                    f.body = read_body(b);
                    m_.functions.push_back(std::move(f));
                }
                break;
            }
            case data:
            {
                const uint32_t n = s.count(3);
                for (uint32_t i = 0; i < n; ++i)
                {
                    DataSegment d;
                    d.memory_index = s.u32();
                    if (d.memory_index != 0)
                        s.fail("unsupported data segment kind");
                    d.offset = read_const_expr(s);
                    const uint32_t len = s.u32();
                    const auto bytes = s.take(len);
                    d.bytes.assign(bytes.begin(), bytes.end());
                    m_.data.push_back(std::move(d));
                }
                break;
            }
            default:
                break;
            }
            if (!s.empty())
                s.fail("section size mismatch");
        }
        if (!saw_code && !func_types.empty())
            throw DecodeError{bytes_.size(), "function and code section have inconsistent lengths"};
        return std::move(m_);
    }

private:
    void read_types(Reader& s)
    {
        const uint32_t n = s.count(3);
        for (uint32_t i = 0; i < n; ++i)
        {
            if (s.u8() != func_type_tag)
                s.fail("invalid function type tag");
            FuncType t;
            const uint32_t np = s.count();
            for (uint32_t j = 0; j < np; ++j)
                t.params.push_back(read_valtype(s));
            const uint32_t nr = s.count();
            if (nr > 1)
                s.fail("multiple results are not supported");
            for (uint32_t j = 0; j < nr; ++j)
                t.results.push_back(read_valtype(s));
            m_.types.push_back(std::move(t));
        }
    }

    void read_imports(Reader& s)
    {
        const uint32_t n = s.count(4);
        for (uint32_t i = 0; i < n; ++i)
        {
            Import imp;
            imp.module = s.name();
            imp.field = s.name();
            const uint8_t k = s.u8();
            switch (k)
            {
            case 0:
                imp.kind = ExternKind::func;
                imp.type_index = s.u32();
                if (imp.type_index >= m_.types.size())
                    s.fail("type index out of range");
                break;
            case 1:
                imp.kind = ExternKind::table;
                imp.table = read_table_type(s);
                break;
            case 2:
                imp.kind = ExternKind::memory;
                imp.memory = MemoryDef{read_limits(s)};
                break;
            case 3:
                imp.kind = ExternKind::global;
                imp.global = read_global_type(s);
                break;
            default:
                s.fail("invalid import kind");
            }
            m_.imports.push_back(std::move(imp));
        }
    }

    static void read_locals(Reader& b, FuncDef& f)
    {
        const uint32_t groups = b.count(2);
        uint64_t total = 0;
        for (uint32_t g = 0; g < groups; ++g)
        {
            const uint32_t n = b.u32();
            total += n;
            if (total > max_locals)
                b.fail("too many locals");
            const ValKind k = read_valtype(b);
            f.locals.insert(f.locals.end(), n, k);
        }
    }

    std::span<const uint8_t> bytes_;
    ModuleIR m_;
};

// ---------------------------------------------------------------------------

class Writer
{
public:
    void u8(uint8_t b) { out_.push_back(b); }
    void bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

    void uleb(uint64_t v)
    {
        do
        {
            uint8_t b = v & 0x7f;
            v >>= 7;
            if (v != 0)
                b |= 0x80;
            out_.push_back(b);
        } while (v != 0);
    }

    void sleb(int64_t v)
    {
        while (true)
        {
            const uint8_t b = v & 0x7f;
            v >>= 7;
            if ((v == 0 && (b & 0x40) == 0) || (v == -1 && (b & 0x40) != 0))
            {
                out_.push_back(b);
                return;
            }
            out_.push_back(b | 0x80);
        }
    }

    void name(std::string_view s)
    {
        uleb(s.size());
        out_.insert(out_.end(), s.begin(), s.end());
    }

    std::vector<uint8_t>& buffer() { return out_; }

private:
    std::vector<uint8_t> out_;
};

void write_limits(Writer& w, const Limits& l)
{
    w.u8(l.max ? 0x01 : 0x00);
    w.uleb(l.min);
    if (l.max)
        w.uleb(*l.max);
}

void write_instr(Writer& w, const Instr& in)
{
    w.u8(static_cast<uint8_t>(in.op));
    switch (opcode_info(in.op).imm)
    {
    case ImmKind::none:
        break;
    case ImmKind::block:
        w.u8(in.block.result ? static_cast<uint8_t>(*in.block.result) : empty_block);
        break;
    case ImmKind::label:
    case ImmKind::func:
    case ImmKind::local:
    case ImmKind::global:
        w.uleb(in.index);
        break;
    case ImmKind::br_table:
        w.uleb(in.targets.size());
        for (const auto t : in.targets)
            w.uleb(t);
        w.uleb(in.index);
        break;
    case ImmKind::indirect:
        w.uleb(in.index);
        w.u8(0);
        break;
    case ImmKind::memarg:
        w.uleb(in.align);
        w.uleb(in.offset);
        break;
    case ImmKind::memory:
        w.u8(0);
        break;
    case ImmKind::i32:
        w.sleb(static_cast<int32_t>(static_cast<uint32_t>(in.value)));
        break;
    case ImmKind::i64:
        w.sleb(static_cast<int64_t>(in.value));
        break;
    case ImmKind::f32:
        for (int i = 0; i < 4; ++i)
            w.u8(static_cast<uint8_t>(in.value >> (8 * i)));
        break;
    case ImmKind::f64:
        for (int i = 0; i < 8; ++i)
            w.u8(static_cast<uint8_t>(in.value >> (8 * i)));
        break;
    }
}

void write_const_expr(Writer& w, const ConstExpr& e)
{
    write_instr(w, e.instr);
    w.u8(static_cast<uint8_t>(Opcode::end));
}

class Encoder
{
public:
    explicit Encoder(const ModuleIR& m) : m_{m} {}

    std::vector<uint8_t> encode()
    {
        out_.bytes(magic);
        out_.bytes(version);
        emit_customs(0);

        section(type, !m_.types.empty(), [&](Writer& w) {
                w.uleb(m_.types.size());
                for (const auto& t : m_.types)
                {
                    w.u8(func_type_tag);
                    w.uleb(t.params.size());
                    for (const auto k : t.params)
                        w.u8(static_cast<uint8_t>(k));
                    w.uleb(t.results.size());
                    for (const auto k : t.results)
                        w.u8(static_cast<uint8_t>(k));
                }
            });
        section(import, !m_.imports.empty(), [&](Writer& w) {
                w.uleb(m_.imports.size());
                for (const auto& imp : m_.imports)
                {
                    w.name(imp.module);
                    w.name(imp.field);
                    w.u8(static_cast<uint8_t>(imp.kind));
                    switch (imp.kind)
                    {
                    case ExternKind::func:
                        w.uleb(imp.type_index);
                        break;
                    case ExternKind::table:
                        w.u8(funcref_type);
                        write_limits(w, imp.table.limits);
                        break;
                    case ExternKind::memory:
                        write_limits(w, imp.memory.limits);
                        break;
                    case ExternKind::global:
                        w.u8(static_cast<uint8_t>(imp.global.kind));
                        w.u8(imp.global.mutable_ ? 1 : 0);
                        break;
                    }
                }
            });
        section(function, !m_.functions.empty(), [&](Writer& w) {
                w.uleb(m_.functions.size());
                for (const auto& f : m_.functions)
                    w.uleb(f.type_index);
            });
        section(table, m_.table.has_value(), [&](Writer& w) {
                w.uleb(1);
                w.u8(funcref_type);
                write_limits(w, m_.table->limits);
            });
        section(memory, m_.memory.has_value(), [&](Writer& w) {
                w.uleb(1);
                write_limits(w, m_.memory->limits);
            });
        section(global, !m_.globals.empty(), [&](Writer& w) {
                w.uleb(m_.globals.size());
                for (const auto& g : m_.globals)
                {
                    w.u8(static_cast<uint8_t>(g.type.kind));
                    w.u8(g.type.mutable_ ? 1 : 0);
                    write_const_expr(w, g.init);
                }
            });
        section(export_, !m_.exports.empty(), [&](Writer& w) {
                w.uleb(m_.exports.size());
                for (const auto& e : m_.exports)
                {
                    w.name(e.name);
                    w.u8(static_cast<uint8_t>(e.kind));
                    w.uleb(e.index);
                }
            });
        section(start, m_.start.has_value(), [&](Writer& w) { w.uleb(*m_.start); });
        section(element, !m_.elements.empty(), [&](Writer& w) {
                w.uleb(m_.elements.size());
                for (const auto& e : m_.elements)
                {
                    w.uleb(e.table_index);
                    write_const_expr(w, e.offset);
                    w.uleb(e.functions.size());
                    for (const auto f : e.functions)
                        w.uleb(f);
                }
            });
        section(code, !m_.functions.empty(), [&](Writer& w) {
                w.uleb(m_.functions.size());
                for (const auto& f : m_.functions)
                {
                    Writer body;
                    write_locals(body, f.locals);
                    for (const auto& in : f.body)
                        write_instr(body, in);
                    w.uleb(body.buffer().size());
                    w.bytes(body.buffer());
                }
            });
        section(data, !m_.data.empty(), [&](Writer& w) {
                w.uleb(m_.data.size());
                for (const auto& d : m_.data)
                {
                    w.uleb(d.memory_index);
                    write_const_expr(w, d.offset);
                    w.uleb(d.bytes.size());
                    w.bytes(d.bytes);
                }
            });
        return std::move(out_.buffer());
    }

private:
    /// Sections are emitted in id order; customs follow the id they were read after.
    template <typename Fn>
    void section(uint8_t id, bool present, Fn&& fn)
    {
        if (present)
        {
            Writer w;
            fn(w);
            out_.u8(id);
            out_.uleb(w.buffer().size());
            out_.bytes(w.buffer());
        }
        emit_customs(id);
    }

    void emit_customs(uint8_t after)
    {
        for (const auto& c : m_.customs)
        {
            if (c.after_section != after)
                continue;
            Writer w;
            w.name(c.name);
            w.bytes(c.bytes);
            out_.u8(custom);
            out_.uleb(w.buffer().size());
            out_.bytes(w.buffer());
        }
    }

    static void write_locals(Writer& w, const std::vector<ValKind>& locals)
    {
        std::vector<std::pair<uint32_t, ValKind>> groups;
        for (const auto k : locals)
        {
            if (!groups.empty() && groups.back().second == k)
                ++groups.back().first;
            else
                groups.emplace_back(1, k);
        }
        w.uleb(groups.size());
        for (const auto& [n, k] : groups)
        {
            w.uleb(n);
            w.u8(static_cast<uint8_t>(k));
        }
    }

    const ModuleIR& m_;
    Writer out_;
};

}  // namespace

bool has_wasm_magic(std::span<const uint8_t> bytes) noexcept
{
    return bytes.size() >= 4 && std::equal(magic.begin(), magic.end(), bytes.begin());
}

ModuleIR decode_binary(std::span<const uint8_t> bytes)
{
    return Decoder{bytes}.decode();
}

std::vector<uint8_t> encode_binary(const ModuleIR& module)
{
    return Encoder{module}.encode();
}

}  // namespace gobi
