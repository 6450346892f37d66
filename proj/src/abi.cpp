// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/abi.hpp"
#include "gobi/simd.hpp"
#include <algorithm>
#include <charconv>
#include <cstring>
#include <map>
#include <set>

namespace gobi::abi {

namespace {

constexpr std::array<std::string_view, scalar_count> scalar_names{"i8", "i16", "i32", "i64", "f32", "f64", "ptr"};

uint64_t align_up(uint64_t v, uint64_t a)
{
    return (v + a - 1) / a * a;
}

uint64_t checked_mul(uint64_t a, uint64_t b)
{
    if (b != 0 && a > UINT64_MAX / b / 16)
        throw AbiError{"record too large"};
    return a * b;
}

// Size, alignment and padding of one type, relative to its own start.
struct Shape
{
    uint64_t size = 0;
    uint32_t align = 1;
    uint64_t data = 0;
    std::vector<Padding> padding;
};

void append_shifted(std::vector<Padding>& out, const std::vector<Padding>& in, uint64_t shift)
{
    for (Padding p : in)
    {
        p.offset += shift;
        out.push_back(p);
    }
}

class LayoutEngine
{
public:
    LayoutEngine(const MachineModel& model, bool adapted) : model_{model}, adapted_{adapted}
    {
        for (size_t i = 0; i < scalar_count; ++i)
        {
            if (model.align[i] == 0 || (model.align[i] & (model.align[i] - 1)) != 0)
                throw AbiError{"model " + model.name + ": alignment of " + std::string{scalar_names[i]} +
                               " is not a power of two"};
        }
        if (adapted && model.size_of(Scalar::ptr) != 8)
            throw AbiError{"adapted layout needs a host model with 8-byte pointers"};
    }

    LayoutResult record(const RecordDef& rec, int depth = 0)
    {
        if (depth > 64)
            throw AbiError{"record nesting too deep at " + rec.name};
        if (rec.fields.empty())
            throw AbiError{"record " + rec.name + " has no fields"};
        LayoutResult out;
        uint64_t offset = 0;
        for (const Field& f : rec.fields)
        {
            const Shape s = shape(f.type, depth);
            const uint64_t at = align_up(offset, s.align);
            if (at > offset)
                out.padding.push_back({offset, at - offset, Padding::Kind::alignment});
            out.fields.push_back({f.name, at, s.size, s.align});
            append_shifted(out.padding, s.padding, at);
            out.data_bytes += s.data;
            out.align = std::max(out.align, s.align);
            offset = at + s.size;
        }
        out.size = align_up(offset, out.align);
        if (out.size > offset)
            out.padding.push_back({offset, out.size - offset, Padding::Kind::tail});
        return out;
    }

private:
    Shape shape(const FieldType& t, int depth)
    {
        switch (t.kind)
        {
        case FieldType::Kind::scalar:
            if (adapted_ && t.scalar == Scalar::ptr)
                return Shape{8, 8, 4, {{4, 4, Padding::Kind::pointer_tail}}};
            return Shape{model_.size_of(t.scalar), model_.align_of(t.scalar), model_.size_of(t.scalar), {}};
        case FieldType::Kind::record:
        {
            LayoutResult r = record(*t.record, depth + 1);
            return Shape{r.size, r.align, r.data_bytes, std::move(r.padding)};
        }
        case FieldType::Kind::array:
            break;
        }
        if (t.count == 0)
            throw AbiError{"array count must be positive"};
        if (adapted_ && t.is_pointer_array())
        {
            // Nested pointer arrays are one flat run of pointers.
            uint64_t n = 1;
            for (const FieldType* e = &t; e->kind == FieldType::Kind::array; e = e->element.get())
                n = checked_mul(n, e->count);
            return Shape{8 * n, 8, 4 * n, {{4 * n, 4 * n, Padding::Kind::pointer_tail}}};
        }
        const Shape e = shape(*t.element, depth);
        Shape s{checked_mul(e.size, t.count), e.align, e.data * t.count, {}};
        if (!e.padding.empty())
        {
            if (checked_mul(e.padding.size(), t.count) > (1u << 24))
                throw AbiError{"array padding map too large"};
            for (uint64_t k = 0; k < t.count; ++k)
                append_shifted(s.padding, e.padding, k * e.size);
        }
        return s;
    }

    const MachineModel& model_;
    bool adapted_;
};

// ---- record text parser ----

struct Node
{
    bool is_list = false;
    std::string atom;
    std::vector<Node> items;
    uint32_t line = 1;
    uint32_t column = 1;
};

[[noreturn]] void fail_at(const Node& n, const std::string& message)
{
    throw AbiError{std::to_string(n.line) + ":" + std::to_string(n.column) + ": " + message};
}

class Reader
{
public:
    explicit Reader(std::string_view text) : text_{text} {}

    std::vector<Node> read_all()
    {
        std::vector<Node> out;
        for (skip(); pos_ < text_.size(); skip())
            out.push_back(read(0));
        return out;
    }

private:
    Node here() const
    {
        Node n;
        n.line = line_;
        n.column = column_;
        return n;
    }

    void advance()
    {
        if (text_[pos_] == '\n')
        {
            ++line_;
            column_ = 1;
        }
        else
            ++column_;
        ++pos_;
    }

    void skip()
    {
        while (pos_ < text_.size())
        {
            const char c = text_[pos_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
                advance();
            else if (c == ';' && pos_ + 1 < text_.size() && text_[pos_ + 1] == ';')
                while (pos_ < text_.size() && text_[pos_] != '\n')
                    advance();
            else
                break;
        }
    }

    Node read(int depth)
    {
        Node n = here();
        if (depth > 256)
            fail_at(n, "nesting too deep");
        if (text_[pos_] == ')')
            fail_at(n, "unexpected ')'");
        if (text_[pos_] == '(')
        {
            n.is_list = true;
            advance();
            for (skip(); pos_ < text_.size() && text_[pos_] != ')'; skip())
                n.items.push_back(read(depth + 1));
            if (pos_ >= text_.size())
                fail_at(n, "unclosed list");
            advance();
            return n;
        }
        while (pos_ < text_.size())
        {
            const char c = text_[pos_];
            if (c == '(' || c == ')' || c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ';')
                break;
            n.atom += c;
            advance();
        }
        return n;
    }

    std::string_view text_;
    size_t pos_ = 0;
    uint32_t line_ = 1;
    uint32_t column_ = 1;
};

bool head_is(const Node& n, std::string_view word)
{
    return n.is_list && !n.items.empty() && !n.items[0].is_list && n.items[0].atom == word;
}

const std::string& atom_of(const Node& n, std::string_view what)
{
    if (n.is_list || n.atom.empty())
        fail_at(n, "expected " + std::string{what});
    return n.atom;
}

class RecordParser
{
public:
    std::vector<std::shared_ptr<const RecordDef>> parse(std::string_view text)
    {
        const std::vector<Node> top = Reader{text}.read_all();
        std::vector<std::string> order;
        for (const Node& n : top)
        {
            if (head_is(n, "union"))
                fail_at(n, "unions are not supported");
            if (!head_is(n, "record"))
                fail_at(n, "expected (record ...)");
            if (n.items.size() < 3)
                fail_at(n, "record " + (n.items.size() > 1 ? n.items[1].atom : std::string{}) + " has no fields");
            order.push_back(collect(n));
        }
        std::vector<std::shared_ptr<const RecordDef>> out;
        for (const std::string& name : order)
            out.push_back(build(name));
        return out;
    }

private:
    // Registers `n` and every inline definition inside it; returns its name.
    std::string collect(const Node& n)
    {
        const std::string name = atom_of(n.items.size() > 1 ? n.items[1] : n, "record name");
        if (!defs_.emplace(name, &n).second)
            fail_at(n, "duplicate record " + name);
        for (size_t i = 2; i < n.items.size(); ++i)
            collect_type_defs(field_type_node(n.items[i]));
        return name;
    }

    const Node& field_type_node(const Node& f)
    {
        if (head_is(f, "bitfield") || head_is(f, "bits"))
            fail_at(f, "bitfields are not supported");
        if (!head_is(f, "field"))
            fail_at(f, "expected (field name type)");
        if (f.items.size() != 3)
            fail_at(f, f.items.size() > 3 ? "bitfields are not supported" : "expected (field name type)");
        return f.items[2];
    }

    void collect_type_defs(const Node& t)
    {
        if (head_is(t, "record") && t.items.size() > 2)
            collect(t);
        else if (head_is(t, "array") && t.items.size() == 3)
            collect_type_defs(t.items[1]);
    }

    std::shared_ptr<const RecordDef> build(const std::string& name, const Node* use = nullptr)
    {
        if (const auto it = built_.find(name); it != built_.end())
            return it->second;
        const auto def = defs_.find(name);
        if (def == defs_.end())
            fail_at(*use, "unknown record " + name);
        if (!building_.insert(name).second)
            fail_at(*use, "record " + name + " contains itself");

        const Node& n = *def->second;
        auto rec = std::make_shared<RecordDef>();
        rec->name = name;
        std::set<std::string> seen;
        for (size_t i = 2; i < n.items.size(); ++i)
        {
            const Node& f = n.items[i];
            const Node& type = field_type_node(f);
            const std::string& fname = atom_of(f.items[1], "field name");
            if (!seen.insert(fname).second)
                fail_at(f, "duplicate field " + fname + " in " + name);
            rec->fields.push_back({fname, field_type(type)});
        }
        building_.erase(name);
        built_.emplace(name, rec);
        return rec;
    }

    FieldType field_type(const Node& t)
    {
        if (!t.is_list)
        {
            if (const auto s = scalar_from_name(t.atom))
                return FieldType::of(*s);
            fail_at(t, "unknown type " + t.atom);
        }
        if (head_is(t, "union"))
            fail_at(t, "unions are not supported");
        if (head_is(t, "bitfield") || head_is(t, "bits"))
            fail_at(t, "bitfields are not supported");
        if (head_is(t, "array"))
        {
            if (t.items.size() != 3)
                fail_at(t, "expected (array type count)");
            const std::string& text = atom_of(t.items[2], "array count");
            uint32_t count = 0;
            const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), count);
            if (ec != std::errc{} || end != text.data() + text.size() || count == 0)
                fail_at(t.items[2], "array count must be a positive integer");
            return FieldType::array_of(field_type(t.items[1]), count);
        }
        if (head_is(t, "record"))
        {
            if (t.items.size() < 2)
                fail_at(t, "expected record name");
            return FieldType::record_of(build(atom_of(t.items[1], "record name"), &t));
        }
        fail_at(t, "unknown type form");
    }

    std::map<std::string, const Node*> defs_;
    std::map<std::string, std::shared_ptr<const RecordDef>> built_;
    std::set<std::string> building_;
};

void store_le(uint8_t* p, uint64_t v, size_t width)
{
    for (size_t i = 0; i < width; ++i)
        p[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint64_t load_le(const uint8_t* p, size_t width)
{
    uint64_t v = 0;
    for (size_t i = 0; i < width; ++i)
        v |= uint64_t{p[i]} << (8 * i);
    return v;
}

}  // namespace

std::string_view to_string(Scalar s) noexcept
{
    return scalar_names[static_cast<size_t>(s)];
}

std::optional<Scalar> scalar_from_name(std::string_view name) noexcept
{
    for (size_t i = 0; i < scalar_count; ++i)
        if (scalar_names[i] == name)
            return static_cast<Scalar>(i);
    if (name == "pointer")
        return Scalar::ptr;
    return std::nullopt;
}

MachineModel MachineModel::host64()
{
    return {"host64", {1, 2, 4, 8, 4, 8, 8}, {1, 2, 4, 8, 4, 8, 8}};
}

MachineModel MachineModel::wasm32()
{
    return {"wasm32", {1, 2, 4, 8, 4, 8, 4}, {1, 2, 4, 8, 4, 8, 4}};
}

FieldType FieldType::of(Scalar s)
{
    FieldType t;
    t.kind = Kind::scalar;
    t.scalar = s;
    return t;
}

FieldType FieldType::array_of(FieldType element, uint32_t count)
{
    FieldType t;
    t.kind = Kind::array;
    t.element = std::make_shared<const FieldType>(std::move(element));
    t.count = count;
    return t;
}

FieldType FieldType::record_of(std::shared_ptr<const RecordDef> record)
{
    FieldType t;
    t.kind = Kind::record;
    t.record = std::move(record);
    return t;
}

bool FieldType::is_pointer_array() const noexcept
{
    const FieldType* t = this;
    if (t->kind != Kind::array)
        return false;
    while (t->kind == Kind::array)
        t = t->element.get();
    return t->kind == Kind::scalar && t->scalar == Scalar::ptr;
}

std::string FieldType::to_string() const
{
    switch (kind)
    {
    case Kind::scalar: return std::string{abi::to_string(scalar)};
    case Kind::array: return "(array " + element->to_string() + " " + std::to_string(count) + ")";
    case Kind::record: return "(record " + record->name + ")";
    }
    return "?";
}

uint64_t LayoutResult::padding_bytes() const noexcept
{
    uint64_t total = 0;
    for (const Padding& p : padding)
        total += p.length;
    return total;
}

LayoutResult layout(const RecordDef& rec, const MachineModel& model)
{
    return LayoutEngine{model, false}.record(rec);
}

LayoutResult layout_adapted(const RecordDef& rec, const MachineModel& host)
{
    return LayoutEngine{host, true}.record(rec);
}

CompatibilityReport check_compatible(const RecordDef& rec, const MachineModel& host)
{
    const LayoutResult h = layout(rec, host);
    const LayoutResult s = layout_adapted(rec, host);
    CompatibilityReport r;
    r.host_size = h.size;
    r.sandbox_size = s.size;
    for (size_t i = 0; i < h.fields.size(); ++i)
        if (h.fields[i].offset != s.fields[i].offset)
            r.diffs.push_back({h.fields[i].name, h.fields[i].offset, s.fields[i].offset});
    r.compatible = r.diffs.empty() && h.size == s.size;
    return r;
}

std::vector<std::shared_ptr<const RecordDef>> parse_records(std::string_view text)
{
    return RecordParser{}.parse(text);
}

ConvertResult convert_ptr_array_in_place(std::span<uint8_t> buffer, size_t count, Direction direction,
                                         const ValueMap& value_map)
{
    if (count > SIZE_MAX / 8 || buffer.size() != 8 * count)
        throw AbiError{"pointer array buffer must be 8*count bytes"};
    std::vector<uint8_t> scratch(buffer.size(), 0);
    if (direction == Direction::host_to_sandbox)
    {
        for (size_t i = 0; i < count; ++i)
        {
            const auto v = value_map(load_le(buffer.data() + 8 * i, 8));
            if (!v || *v > UINT32_MAX)
                return ConvertResult{false, i};
            store_le(scratch.data() + 4 * i, *v, 4);
        }
    }
    else
    {
        // The in-place form expands from the last element down; the scratch
        // copy gives the same result and keeps the input intact on failure.
        for (size_t i = count; i-- > 0;)
        {
            const auto v = value_map(load_le(buffer.data() + 4 * i, 4));
            if (!v)
                return ConvertResult{false, i};
            store_le(scratch.data() + 8 * i, *v, 8);
        }
    }
    std::memcpy(buffer.data(), scratch.data(), scratch.size());
    return ConvertResult{};
}

ConvertResult convert_ptr_array_in_place(std::span<uint8_t> buffer, size_t count, Direction direction)
{
    if (count > SIZE_MAX / 8 || buffer.size() != 8 * count)
        throw AbiError{"pointer array buffer must be 8*count bytes"};
    const simd::PtrKernels& k = simd::active_kernels();
    std::vector<uint8_t> scratch(buffer.size(), 0);
    if (direction == Direction::host_to_sandbox)
    {
        if (!k.pack(buffer.data(), scratch.data(), count))
        {
            size_t i = 0;
            while (load_le(buffer.data() + 8 * i, 8) <= UINT32_MAX)
                ++i;
            return ConvertResult{false, i};
        }
    }
    else
    {
        k.unpack(buffer.data(), scratch.data(), count);
    }
    std::memcpy(buffer.data(), scratch.data(), scratch.size());
    return ConvertResult{};
}

}  // namespace gobi::abi
