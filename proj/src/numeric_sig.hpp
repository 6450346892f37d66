// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/module.hpp"
#include <optional>

namespace gobi {

struct NumericSig
{
    uint8_t arity;
    ValKind params[2];
    ValKind result;
};

/// Operand/result kinds of the numeric opcodes 0x45..0xbf.
inline std::optional<NumericSig> numeric_sig(uint8_t op) noexcept
{
    constexpr auto I32 = ValKind::I32;
    constexpr auto I64 = ValKind::I64;
    constexpr auto F32 = ValKind::F32;
    constexpr auto F64 = ValKind::F64;
    auto unary = [](ValKind in, ValKind out) { return NumericSig{1, {in, in}, out}; };
    auto binary = [](ValKind in, ValKind out) { return NumericSig{2, {in, in}, out}; };

    if (op == 0x45)
        return unary(I32, I32);
    if (op >= 0x46 && op <= 0x4f)
        return binary(I32, I32);
    if (op == 0x50)
        return unary(I64, I32);
    if (op >= 0x51 && op <= 0x5a)
        return binary(I64, I32);
    if (op >= 0x5b && op <= 0x60)
        return binary(F32, I32);
    if (op >= 0x61 && op <= 0x66)
        return binary(F64, I32);
    if (op >= 0x67 && op <= 0x69)
        return unary(I32, I32);
    if (op >= 0x6a && op <= 0x78)
        return binary(I32, I32);
    if (op >= 0x79 && op <= 0x7b)
        return unary(I64, I64);
    if (op >= 0x7c && op <= 0x8a)
        return binary(I64, I64);
    if (op >= 0x8b && op <= 0x91)
        return unary(F32, F32);
    if (op >= 0x92 && op <= 0x98)
        return binary(F32, F32);
    if (op >= 0x99 && op <= 0x9f)
        return unary(F64, F64);
    if (op >= 0xa0 && op <= 0xa6)
        return binary(F64, F64);

    switch (op)
    {
    case 0xa7: return unary(I64, I32);
    case 0xa8: case 0xa9: return unary(F32, I32);
    case 0xaa: case 0xab: return unary(F64, I32);
    case 0xac: case 0xad: return unary(I32, I64);
    case 0xae: case 0xaf: return unary(F32, I64);
    case 0xb0: case 0xb1: return unary(F64, I64);
    case 0xb2: case 0xb3: return unary(I32, F32);
    case 0xb4: case 0xb5: return unary(I64, F32);
    case 0xb6: return unary(F64, F32);
    case 0xb7: case 0xb8: return unary(I32, F64);
    case 0xb9: case 0xba: return unary(I64, F64);
    case 0xbb: return unary(F32, F64);
    case 0xbc: return unary(F32, I32);
    case 0xbd: return unary(F64, I64);
    case 0xbe: return unary(I32, F32);
    case 0xbf: return unary(I64, F64);
    default: return std::nullopt;
    }
}

struct MemorySig
{
    ValKind kind;   // value loaded or stored
    bool is_store;
    uint8_t width;  // bytes accessed
};

inline MemorySig memory_sig(Opcode op) noexcept
{
    using enum Opcode;
    switch (op)
    {
    case i32_load: return {ValKind::I32, false, 4};
    case i64_load: return {ValKind::I64, false, 8};
    case f32_load: return {ValKind::F32, false, 4};
    case f64_load: return {ValKind::F64, false, 8};
    case i32_load8_s: case i32_load8_u: return {ValKind::I32, false, 1};
    case i32_load16_s: case i32_load16_u: return {ValKind::I32, false, 2};
    case i64_load8_s: case i64_load8_u: return {ValKind::I64, false, 1};
    case i64_load16_s: case i64_load16_u: return {ValKind::I64, false, 2};
    case i64_load32_s: case i64_load32_u: return {ValKind::I64, false, 4};
    case i32_store: return {ValKind::I32, true, 4};
    case i64_store: return {ValKind::I64, true, 8};
    case f32_store: return {ValKind::F32, true, 4};
    case f64_store: return {ValKind::F64, true, 8};
    case i32_store8: return {ValKind::I32, true, 1};
    case i32_store16: return {ValKind::I32, true, 2};
    case i64_store8: return {ValKind::I64, true, 1};
    case i64_store16: return {ValKind::I64, true, 2};
    case i64_store32: return {ValKind::I64, true, 4};
    default: return {ValKind::I32, false, 0};
    }
}

}  // namespace gobi
