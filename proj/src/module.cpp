// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/errors.hpp"
#include "gobi/module.hpp"
#include <array>
#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace gobi {

namespace {

using Table = std::array<OpcodeInfo, 256>;

Table build_opcode_table()
{
    Table t{};
    auto set = [&](Opcode op, std::string_view name, ImmKind imm = ImmKind::none,
                   uint8_t align = 0) {
        t[static_cast<uint8_t>(op)] = OpcodeInfo{name, imm, align};
    };

    set(Opcode::unreachable, "unreachable");
    set(Opcode::nop, "nop");
    set(Opcode::block, "block", ImmKind::block);
    set(Opcode::loop, "loop", ImmKind::block);
    set(Opcode::if_, "if", ImmKind::block);
    set(Opcode::else_, "else");
    set(Opcode::end, "end");
    set(Opcode::br, "br", ImmKind::label);
    set(Opcode::br_if, "br_if", ImmKind::label);
    set(Opcode::br_table, "br_table", ImmKind::br_table);
    set(Opcode::return_, "return");
    set(Opcode::call, "call", ImmKind::func);
    set(Opcode::call_indirect, "call_indirect", ImmKind::indirect);
    set(Opcode::drop, "drop");
    set(Opcode::select, "select");
    set(Opcode::local_get, "local.get", ImmKind::local);
    set(Opcode::local_set, "local.set", ImmKind::local);
    set(Opcode::local_tee, "local.tee", ImmKind::local);
    set(Opcode::global_get, "global.get", ImmKind::global);
    set(Opcode::global_set, "global.set", ImmKind::global);

    set(Opcode::i32_load, "i32.load", ImmKind::memarg, 2);
    set(Opcode::i64_load, "i64.load", ImmKind::memarg, 3);
    set(Opcode::f32_load, "f32.load", ImmKind::memarg, 2);
    set(Opcode::f64_load, "f64.load", ImmKind::memarg, 3);
    set(Opcode::i32_load8_s, "i32.load8_s", ImmKind::memarg, 0);
    set(Opcode::i32_load8_u, "i32.load8_u", ImmKind::memarg, 0);
    set(Opcode::i32_load16_s, "i32.load16_s", ImmKind::memarg, 1);
    set(Opcode::i32_load16_u, "i32.load16_u", ImmKind::memarg, 1);
    set(Opcode::i64_load8_s, "i64.load8_s", ImmKind::memarg, 0);
    set(Opcode::i64_load8_u, "i64.load8_u", ImmKind::memarg, 0);
    set(Opcode::i64_load16_s, "i64.load16_s", ImmKind::memarg, 1);
    set(Opcode::i64_load16_u, "i64.load16_u", ImmKind::memarg, 1);
    set(Opcode::i64_load32_s, "i64.load32_s", ImmKind::memarg, 2);
    set(Opcode::i64_load32_u, "i64.load32_u", ImmKind::memarg, 2);
    set(Opcode::i32_store, "i32.store", ImmKind::memarg, 2);
    set(Opcode::i64_store, "i64.store", ImmKind::memarg, 3);
    set(Opcode::f32_store, "f32.store", ImmKind::memarg, 2);
    set(Opcode::f64_store, "f64.store", ImmKind::memarg, 3);
    set(Opcode::i32_store8, "i32.store8", ImmKind::memarg, 0);
    set(Opcode::i32_store16, "i32.store16", ImmKind::memarg, 1);
    set(Opcode::i64_store8, "i64.store8", ImmKind::memarg, 0);
    set(Opcode::i64_store16, "i64.store16", ImmKind::memarg, 1);
    set(Opcode::i64_store32, "i64.store32", ImmKind::memarg, 2);
    set(Opcode::memory_size, "memory.size", ImmKind::memory);
    set(Opcode::memory_grow, "memory.grow", ImmKind::memory);

    set(Opcode::i32_const, "i32.const", ImmKind::i32);
    set(Opcode::i64_const, "i64.const", ImmKind::i64);
    set(Opcode::f32_const, "f32.const", ImmKind::f32);
    set(Opcode::f64_const, "f64.const", ImmKind::f64);

    static constexpr std::string_view numeric[] = {
        "i32.eqz", "i32.eq", "i32.ne", "i32.lt_s", "i32.lt_u", "i32.gt_s", "i32.gt_u",
        "i32.le_s", "i32.le_u", "i32.ge_s", "i32.ge_u",
        "i64.eqz", "i64.eq", "i64.ne", "i64.lt_s", "i64.lt_u", "i64.gt_s", "i64.gt_u",
        "i64.le_s", "i64.le_u", "i64.ge_s", "i64.ge_u",
        "f32.eq", "f32.ne", "f32.lt", "f32.gt", "f32.le", "f32.ge",
        "f64.eq", "f64.ne", "f64.lt", "f64.gt", "f64.le", "f64.ge",
        "i32.clz", "i32.ctz", "i32.popcnt", "i32.add", "i32.sub", "i32.mul", "i32.div_s",
        "i32.div_u", "i32.rem_s", "i32.rem_u", "i32.and", "i32.or", "i32.xor", "i32.shl",
        "i32.shr_s", "i32.shr_u", "i32.rotl", "i32.rotr",
        "i64.clz", "i64.ctz", "i64.popcnt", "i64.add", "i64.sub", "i64.mul", "i64.div_s",
        "i64.div_u", "i64.rem_s", "i64.rem_u", "i64.and", "i64.or", "i64.xor", "i64.shl",
        "i64.shr_s", "i64.shr_u", "i64.rotl", "i64.rotr",
        "f32.abs", "f32.neg", "f32.ceil", "f32.floor", "f32.trunc", "f32.nearest",
        "f32.sqrt", "f32.add", "f32.sub", "f32.mul", "f32.div", "f32.min", "f32.max",
        "f32.copysign",
        "f64.abs", "f64.neg", "f64.ceil", "f64.floor", "f64.trunc", "f64.nearest",
        "f64.sqrt", "f64.add", "f64.sub", "f64.mul", "f64.div", "f64.min", "f64.max",
        "f64.copysign",
        "i32.wrap_i64", "i32.trunc_f32_s", "i32.trunc_f32_u", "i32.trunc_f64_s",
        "i32.trunc_f64_u", "i64.extend_i32_s", "i64.extend_i32_u", "i64.trunc_f32_s",
        "i64.trunc_f32_u", "i64.trunc_f64_s", "i64.trunc_f64_u", "f32.convert_i32_s",
        "f32.convert_i32_u", "f32.convert_i64_s", "f32.convert_i64_u", "f32.demote_f64",
        "f64.convert_i32_s", "f64.convert_i32_u", "f64.convert_i64_s", "f64.convert_i64_u",
        "f64.promote_f32", "i32.reinterpret_f32", "i64.reinterpret_f64",
        "f32.reinterpret_i32", "f64.reinterpret_i64",
    };
    static_assert(std::size(numeric) == 0xbf - 0x45 + 1);
    for (size_t i = 0; i < std::size(numeric); ++i)
        t[0x45 + i] = OpcodeInfo{numeric[i], ImmKind::none, 0};
    return t;
}

const Table& opcode_table()
{
    static const Table table = build_opcode_table();
    return table;
}

const std::unordered_map<std::string_view, Opcode>& opcode_names()
{
    static const auto names = [] {
        std::unordered_map<std::string_view, Opcode> m;
        const auto& t = opcode_table();
        for (size_t i = 0; i < t.size(); ++i)
            if (!t[i].name.empty())
                m.emplace(t[i].name, static_cast<Opcode>(i));
        return m;
    }();
    return names;
}

std::string format_float(double v, int digits)
{
    if (std::isnan(v))
        return std::signbit(v) ? "-nan" : "nan";
    if (std::isinf(v))
        return v < 0 ? "-inf" : "inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

}  // namespace

const OpcodeInfo& opcode_info(uint8_t byte) noexcept
{
    return opcode_table()[byte];
}

std::optional<Opcode> opcode_from_name(std::string_view name) noexcept
{
    const auto& names = opcode_names();
    if (const auto it = names.find(name); it != names.end())
        return it->second;
    return std::nullopt;
}

std::string_view to_string(ValKind kind) noexcept
{
    switch (kind)
    {
    case ValKind::I32:
        return "i32";
    case ValKind::I64:
        return "i64";
    case ValKind::F32:
        return "f32";
    case ValKind::F64:
        return "f64";
    }
    return "?";
}

std::optional<ValKind> val_kind_from_name(std::string_view name) noexcept
{
    if (name == "i32")
        return ValKind::I32;
    if (name == "i64")
        return ValKind::I64;
    if (name == "f32")
        return ValKind::F32;
    if (name == "f64")
        return ValKind::F64;
    return std::nullopt;
}

std::string_view to_string(ExternKind kind) noexcept
{
    switch (kind)
    {
    case ExternKind::func:
        return "func";
    case ExternKind::table:
        return "table";
    case ExternKind::memory:
        return "memory";
    case ExternKind::global:
        return "global";
    }
    return "?";
}

std::string to_string(const FuncType& type)
{
    std::string s = "(";
    for (size_t i = 0; i < type.params.size(); ++i)
    {
        if (i != 0)
            s += ", ";
        s += to_string(type.params[i]);
    }
    s += ") -> (";
    for (size_t i = 0; i < type.results.size(); ++i)
    {
        if (i != 0)
            s += ", ";
        s += to_string(type.results[i]);
    }
    return s + ")";
}

std::string format_plain(const Value& value)
{
    switch (value.kind())
    {
    case ValKind::I32:
        return std::to_string(value.as_i32());
    case ValKind::I64:
        return std::to_string(value.as_i64());
    case ValKind::F32:
        return format_float(value.as_f32(), 9);
    case ValKind::F64:
        return format_float(value.as_f64(), 17);
    }
    return "?";
}

std::string to_string(const Value& value)
{
    return std::string{to_string(value.kind())} + ":" + format_plain(value);
}

uint32_t ModuleIR::imported_function_count() const noexcept
{
    uint32_t n = 0;
    for (const auto& imp : imports)
        n += imp.kind == ExternKind::func;
    return n;
}

uint32_t ModuleIR::imported_global_count() const noexcept
{
    uint32_t n = 0;
    for (const auto& imp : imports)
        n += imp.kind == ExternKind::global;
    return n;
}

uint32_t ModuleIR::function_count() const noexcept
{
    return imported_function_count() + static_cast<uint32_t>(functions.size());
}

uint32_t ModuleIR::global_count() const noexcept
{
    return imported_global_count() + static_cast<uint32_t>(globals.size());
}

bool ModuleIR::has_table() const noexcept
{
    return table_limits().has_value();
}

bool ModuleIR::has_memory() const noexcept
{
    return memory_limits().has_value();
}

const FuncType& ModuleIR::function_type(uint32_t index) const
{
    for (const auto& imp : imports)
    {
        if (imp.kind != ExternKind::func)
            continue;
        if (index == 0)
            return types.at(imp.type_index);
        --index;
    }
    return types.at(functions.at(index).type_index);
}

GlobalType ModuleIR::global_type(uint32_t index) const
{
    for (const auto& imp : imports)
    {
        if (imp.kind != ExternKind::global)
            continue;
        if (index == 0)
            return imp.global;
        --index;
    }
    return globals.at(index).type;
}

std::optional<Limits> ModuleIR::table_limits() const
{
    if (table)
        return table->limits;
    for (const auto& imp : imports)
        if (imp.kind == ExternKind::table)
            return imp.table.limits;
    return std::nullopt;
}

std::optional<Limits> ModuleIR::memory_limits() const
{
    if (memory)
        return memory->limits;
    for (const auto& imp : imports)
        if (imp.kind == ExternKind::memory)
            return imp.memory.limits;
    return std::nullopt;
}

const Export* ModuleIR::find_export(std::string_view name) const noexcept
{
    for (const auto& e : exports)
        if (e.name == name)
            return &e;
    return nullptr;
}

ParseError::ParseError(Kind kind, uint32_t line, uint32_t column, const std::string& message)
  : Error{std::to_string(line) + ":" + std::to_string(column) + ": " + message},
    kind_{kind},
    line_{line},
    column_{column},
    message_{message}
{}

DecodeError::DecodeError(size_t offset, const std::string& message)
  : Error{message + " at offset " + std::to_string(offset)}, offset_{offset}, message_{message}
{}

}  // namespace gobi
