// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/types.hpp"
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gobi {

/// MVP opcodes. Values are the binary encodings.
enum class Opcode : uint8_t
{
    unreachable = 0x00,
    nop = 0x01,
    block = 0x02,
    loop = 0x03,
    if_ = 0x04,
    else_ = 0x05,
    end = 0x0b,
    br = 0x0c,
    br_if = 0x0d,
    br_table = 0x0e,
    return_ = 0x0f,
    call = 0x10,
    call_indirect = 0x11,

    drop = 0x1a,
    select = 0x1b,

    local_get = 0x20,
    local_set = 0x21,
    local_tee = 0x22,
    global_get = 0x23,
    global_set = 0x24,

    i32_load = 0x28,
    i64_load = 0x29,
    f32_load = 0x2a,
    f64_load = 0x2b,
    i32_load8_s = 0x2c,
    i32_load8_u = 0x2d,
    i32_load16_s = 0x2e,
    i32_load16_u = 0x2f,
    i64_load8_s = 0x30,
    i64_load8_u = 0x31,
    i64_load16_s = 0x32,
    i64_load16_u = 0x33,
    i64_load32_s = 0x34,
    i64_load32_u = 0x35,
    i32_store = 0x36,
    i64_store = 0x37,
    f32_store = 0x38,
    f64_store = 0x39,
    i32_store8 = 0x3a,
    i32_store16 = 0x3b,
    i64_store8 = 0x3c,
    i64_store16 = 0x3d,
    i64_store32 = 0x3e,
    memory_size = 0x3f,
    memory_grow = 0x40,

    i32_const = 0x41,
    i64_const = 0x42,
    f32_const = 0x43,
    f64_const = 0x44,

    i32_eqz = 0x45,
    i32_eq = 0x46,
    i32_ne = 0x47,
    i32_lt_s = 0x48,
    i32_lt_u = 0x49,
    i32_gt_s = 0x4a,
    i32_gt_u = 0x4b,
    i32_le_s = 0x4c,
    i32_le_u = 0x4d,
    i32_ge_s = 0x4e,
    i32_ge_u = 0x4f,

    i64_eqz = 0x50,
    i64_eq = 0x51,
    i64_ne = 0x52,
    i64_lt_s = 0x53,
    i64_lt_u = 0x54,
    i64_gt_s = 0x55,
    i64_gt_u = 0x56,
    i64_le_s = 0x57,
    i64_le_u = 0x58,
    i64_ge_s = 0x59,
    i64_ge_u = 0x5a,

    f32_eq = 0x5b,
    f32_ne = 0x5c,
    f32_lt = 0x5d,
    f32_gt = 0x5e,
    f32_le = 0x5f,
    f32_ge = 0x60,

    f64_eq = 0x61,
    f64_ne = 0x62,
    f64_lt = 0x63,
    f64_gt = 0x64,
    f64_le = 0x65,
    f64_ge = 0x66,

    i32_clz = 0x67,
    i32_ctz = 0x68,
    i32_popcnt = 0x69,
    i32_add = 0x6a,
    i32_sub = 0x6b,
    i32_mul = 0x6c,
    i32_div_s = 0x6d,
    i32_div_u = 0x6e,
    i32_rem_s = 0x6f,
    i32_rem_u = 0x70,
    i32_and = 0x71,
    i32_or = 0x72,
    i32_xor = 0x73,
    i32_shl = 0x74,
    i32_shr_s = 0x75,
    i32_shr_u = 0x76,
    i32_rotl = 0x77,
    i32_rotr = 0x78,

    i64_clz = 0x79,
    i64_ctz = 0x7a,
    i64_popcnt = 0x7b,
    i64_add = 0x7c,
    i64_sub = 0x7d,
    i64_mul = 0x7e,
    i64_div_s = 0x7f,
    i64_div_u = 0x80,
    i64_rem_s = 0x81,
    i64_rem_u = 0x82,
    i64_and = 0x83,
    i64_or = 0x84,
    i64_xor = 0x85,
    i64_shl = 0x86,
    i64_shr_s = 0x87,
    i64_shr_u = 0x88,
    i64_rotl = 0x89,
    i64_rotr = 0x8a,

    f32_abs = 0x8b,
    f32_neg = 0x8c,
    f32_ceil = 0x8d,
    f32_floor = 0x8e,
    f32_trunc = 0x8f,
    f32_nearest = 0x90,
    f32_sqrt = 0x91,
    f32_add = 0x92,
    f32_sub = 0x93,
    f32_mul = 0x94,
    f32_div = 0x95,
    f32_min = 0x96,
    f32_max = 0x97,
    f32_copysign = 0x98,

    f64_abs = 0x99,
    f64_neg = 0x9a,
    f64_ceil = 0x9b,
    f64_floor = 0x9c,
    f64_trunc = 0x9d,
    f64_nearest = 0x9e,
    f64_sqrt = 0x9f,
    f64_add = 0xa0,
    f64_sub = 0xa1,
    f64_mul = 0xa2,
    f64_div = 0xa3,
    f64_min = 0xa4,
    f64_max = 0xa5,
    f64_copysign = 0xa6,

    i32_wrap_i64 = 0xa7,
    i32_trunc_f32_s = 0xa8,
    i32_trunc_f32_u = 0xa9,
    i32_trunc_f64_s = 0xaa,
    i32_trunc_f64_u = 0xab,
    i64_extend_i32_s = 0xac,
    i64_extend_i32_u = 0xad,
    i64_trunc_f32_s = 0xae,
    i64_trunc_f32_u = 0xaf,
    i64_trunc_f64_s = 0xb0,
    i64_trunc_f64_u = 0xb1,
    f32_convert_i32_s = 0xb2,
    f32_convert_i32_u = 0xb3,
    f32_convert_i64_s = 0xb4,
    f32_convert_i64_u = 0xb5,
    f32_demote_f64 = 0xb6,
    f64_convert_i32_s = 0xb7,
    f64_convert_i32_u = 0xb8,
    f64_convert_i64_s = 0xb9,
    f64_convert_i64_u = 0xba,
    f64_promote_f32 = 0xbb,
    i32_reinterpret_f32 = 0xbc,
    i64_reinterpret_f64 = 0xbd,
    f32_reinterpret_i32 = 0xbe,
    f64_reinterpret_i64 = 0xbf,
};

/// Immediate layout of an opcode.
enum class ImmKind : uint8_t
{
    none,
    block,      // block type
    label,      // br, br_if
    br_table,   // label vector + default
    func,       // call
    indirect,   // call_indirect: type index (+ reserved table byte)
    local,
    global,
    memarg,     // align + offset
    memory,     // reserved memory byte
    i32,
    i64,
    f32,
    f64,
};

struct OpcodeInfo
{
    std::string_view name;  // text-format mnemonic, empty when not an MVP opcode
    ImmKind imm = ImmKind::none;
    uint8_t natural_align_log2 = 0;  // memory ops only
};

/// Metadata for a byte value; `name` is empty for bytes that are not opcodes.
const OpcodeInfo& opcode_info(uint8_t byte) noexcept;
inline const OpcodeInfo& opcode_info(Opcode op) noexcept
{
    return opcode_info(static_cast<uint8_t>(op));
}
std::optional<Opcode> opcode_from_name(std::string_view name) noexcept;

/// Block result: empty or a single value kind (MVP).
struct BlockType
{
    std::optional<ValKind> result;
    friend bool operator==(const BlockType&, const BlockType&) = default;
};

struct Instr
{
    Opcode op = Opcode::nop;
    /// label depth, function/type/local/global index, or default label for br_table
    uint32_t index = 0;
    uint32_t align = 0;   // log2 alignment hint
    uint32_t offset = 0;  // static memory offset
    uint64_t value = 0;   // constant bits
    BlockType block;
    std::vector<uint32_t> targets;  // br_table labels (excluding default)

    friend bool operator==(const Instr&, const Instr&) = default;
};

inline Instr make_instr(Opcode op, uint32_t index = 0)
{
    Instr in;
    in.op = op;
    in.index = index;
    return in;
}

enum class ExternKind : uint8_t
{
    func = 0,
    table = 1,
    memory = 2,
    global = 3,
};

std::string_view to_string(ExternKind kind) noexcept;

struct Limits
{
    uint32_t min = 0;
    std::optional<uint32_t> max;
    friend bool operator==(const Limits&, const Limits&) = default;
};

struct TableDef
{
    Limits limits;  // element kind is always funcref
    friend bool operator==(const TableDef&, const TableDef&) = default;
};

struct MemoryDef
{
    Limits limits;  // in 64 KiB pages
    friend bool operator==(const MemoryDef&, const MemoryDef&) = default;
};

struct GlobalType
{
    ValKind kind = ValKind::I32;
    bool mutable_ = false;
    friend bool operator==(const GlobalType&, const GlobalType&) = default;
};

/// A constant expression: one of the *.const instructions or global.get.
struct ConstExpr
{
    Instr instr;
    friend bool operator==(const ConstExpr&, const ConstExpr&) = default;
};

struct GlobalDef
{
    GlobalType type;
    ConstExpr init;
    friend bool operator==(const GlobalDef&, const GlobalDef&) = default;
};

struct FuncDef
{
    uint32_t type_index = 0;
    std::vector<ValKind> locals;  // excluding params
    std::vector<Instr> body;      // including the final `end`
    friend bool operator==(const FuncDef&, const FuncDef&) = default;
};

struct Import
{
    std::string module;
    std::string field;
    ExternKind kind = ExternKind::func;
    uint32_t type_index = 0;  // func
    TableDef table;
    MemoryDef memory;
    GlobalType global;
    friend bool operator==(const Import&, const Import&) = default;
};

struct Export
{
    std::string name;
    ExternKind kind = ExternKind::func;
    uint32_t index = 0;
    friend bool operator==(const Export&, const Export&) = default;
};

struct ElemSegment
{
    uint32_t table_index = 0;
    ConstExpr offset;
    std::vector<uint32_t> functions;
    friend bool operator==(const ElemSegment&, const ElemSegment&) = default;
};

struct DataSegment
{
    uint32_t memory_index = 0;
    ConstExpr offset;
    std::vector<uint8_t> bytes;
    friend bool operator==(const DataSegment&, const DataSegment&) = default;
};

/// Custom sections are kept opaque. `after_section` is the id of the last
/// known section preceding it (0 when it precedes all of them).
struct CustomSection
{
    std::string name;
    std::vector<uint8_t> bytes;
    uint8_t after_section = 0;
    friend bool operator==(const CustomSection&, const CustomSection&) = default;
};

struct ModuleIR
{
    std::vector<FuncType> types;
    std::vector<Import> imports;
    std::vector<FuncDef> functions;  // defined functions only
    std::optional<TableDef> table;
    std::optional<MemoryDef> memory;
    std::vector<GlobalDef> globals;  // defined globals only
    std::vector<Export> exports;
    std::optional<uint32_t> start;
    std::vector<ElemSegment> elements;
    std::vector<DataSegment> data;
    std::vector<CustomSection> customs;

    friend bool operator==(const ModuleIR&, const ModuleIR&) = default;

    uint32_t imported_function_count() const noexcept;
    uint32_t imported_global_count() const noexcept;
    uint32_t function_count() const noexcept;
    uint32_t global_count() const noexcept;
    bool has_table() const noexcept;
    bool has_memory() const noexcept;

    /// Type of function `index` in the function index space (imports first).
    /// Caller must ensure the index and the type index are in range.
    const FuncType& function_type(uint32_t index) const;
    /// Type of global `index` in the global index space (imports first).
    GlobalType global_type(uint32_t index) const;

    /// Table/memory limits whether declared or imported.
    std::optional<Limits> table_limits() const;
    std::optional<Limits> memory_limits() const;

    const Export* find_export(std::string_view name) const noexcept;
};

inline constexpr uint32_t page_size = 65536;
inline constexpr uint32_t max_pages = 65536;

}  // namespace gobi
