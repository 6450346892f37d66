// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Fused i32 operations. The compiler folds short local.get / i32.const
// operand sequences and a following local.set, local.tee or br_if into a
// single op. Operand encoding in Op::b: for L-left shapes the low word is the
// left local and the high word the right operand; for S-left shapes the low
// word is the right operand. Op::a is the destination local (set, tee) or the
// jump target (jump).

#include "code.hpp"
#include <bit>
#include <cstdint>
#include <optional>

namespace gobi::detail {

enum class Shape : uint8_t
{
    ss,  // both operands on the stack
    sk,  // stack, constant
    sl,  // stack, local
    lk,  // local, constant
    ll,  // local, local
};

enum class Dest : uint8_t
{
    push,
    set,
    tee,
    jump,  // jump when the result is non-zero
};

inline constexpr uint16_t fused_base = 0x200;
inline constexpr uint16_t fused_end = fused_base + 20 * 0x40;
inline constexpr uint16_t load_local_base = fused_end;  // + (load opcode - 0x28); a = offset, b = local
inline constexpr uint16_t load_local_end = load_local_base + 14;

constexpr uint16_t fused_code(Shape s, Dest d, uint8_t wasm_op)
{
    return static_cast<uint16_t>(fused_base + (static_cast<unsigned>(s) * 4 + static_cast<unsigned>(d)) * 0x40 +
                                 (wasm_op - 0x40));
}

constexpr bool is_fused(uint16_t code) { return code >= fused_base && code < fused_end; }
constexpr Shape fused_shape(uint16_t code) { return static_cast<Shape>((code - fused_base) / 0x40 / 4); }
constexpr Dest fused_dest(uint16_t code) { return static_cast<Dest>((code - fused_base) / 0x40 % 4); }
constexpr uint8_t fused_op(uint16_t code) { return static_cast<uint8_t>((code - fused_base) % 0x40 + 0x40); }

/// i32 binary operators that may be fused.
constexpr bool fusable_i32(uint8_t op) { return (op >= 0x46 && op <= 0x4f) || (op >= 0x6a && op <= 0x78); }

#define GOBI_FUSED_OPS(X, S, D)                                                                                      \
    X(S, D, 0x46) X(S, D, 0x47) X(S, D, 0x48) X(S, D, 0x49) X(S, D, 0x4a) X(S, D, 0x4b) X(S, D, 0x4c) X(S, D, 0x4d) \
    X(S, D, 0x4e) X(S, D, 0x4f) X(S, D, 0x6a) X(S, D, 0x6b) X(S, D, 0x6c) X(S, D, 0x6d) X(S, D, 0x6e) X(S, D, 0x6f) \
    X(S, D, 0x70) X(S, D, 0x71) X(S, D, 0x72) X(S, D, 0x73) X(S, D, 0x74) X(S, D, 0x75) X(S, D, 0x76) X(S, D, 0x77) \
    X(S, D, 0x78)

// X(shape, dest, wasm_op) with bare Shape and Dest enumerator names.
#define GOBI_FUSED_DESTS(X, S) \
    GOBI_FUSED_OPS(X, S, push) GOBI_FUSED_OPS(X, S, set) GOBI_FUSED_OPS(X, S, tee) GOBI_FUSED_OPS(X, S, jump)

#define GOBI_FUSED_ALL(X)                                                                                   \
    GOBI_FUSED_DESTS(X, ss) GOBI_FUSED_DESTS(X, sk) GOBI_FUSED_DESTS(X, sl) GOBI_FUSED_DESTS(X, lk) \
    GOBI_FUSED_DESTS(X, ll)

[[noreturn, gnu::cold]] void fused_trap(bool overflow);

template <uint8_t O>
[[gnu::always_inline]] inline uint32_t i32_binop(uint32_t a, uint32_t b)
{
    if constexpr (O == 0x46) return a == b;
    else if constexpr (O == 0x47) return a != b;
    else if constexpr (O == 0x48) return static_cast<int32_t>(a) < static_cast<int32_t>(b);
    else if constexpr (O == 0x49) return a < b;
    else if constexpr (O == 0x4a) return static_cast<int32_t>(a) > static_cast<int32_t>(b);
    else if constexpr (O == 0x4b) return a > b;
    else if constexpr (O == 0x4c) return static_cast<int32_t>(a) <= static_cast<int32_t>(b);
    else if constexpr (O == 0x4d) return a <= b;
    else if constexpr (O == 0x4e) return static_cast<int32_t>(a) >= static_cast<int32_t>(b);
    else if constexpr (O == 0x4f) return a >= b;
    else if constexpr (O == 0x6a) return a + b;
    else if constexpr (O == 0x6b) return a - b;
    else if constexpr (O == 0x6c) return a * b;
    else if constexpr (O == 0x6d)
    {
        if (b == 0)
            fused_trap(false);
        if (a == 0x80000000u && b == 0xffffffffu)
            fused_trap(true);
        return static_cast<uint32_t>(static_cast<int32_t>(a) / static_cast<int32_t>(b));
    }
    else if constexpr (O == 0x6e)
    {
        if (b == 0)
            fused_trap(false);
        return a / b;
    }
    else if constexpr (O == 0x6f)
    {
        if (b == 0)
            fused_trap(false);
        return b == 0xffffffffu ? 0 : static_cast<uint32_t>(static_cast<int32_t>(a) % static_cast<int32_t>(b));
    }
    else if constexpr (O == 0x70)
    {
        if (b == 0)
            fused_trap(false);
        return a % b;
    }
    else if constexpr (O == 0x71) return a & b;
    else if constexpr (O == 0x72) return a | b;
    else if constexpr (O == 0x73) return a ^ b;
    else if constexpr (O == 0x74) return a << (b & 31);
    else if constexpr (O == 0x75) return static_cast<uint32_t>(static_cast<int32_t>(a) >> (b & 31));
    else if constexpr (O == 0x76) return a >> (b & 31);
    else if constexpr (O == 0x77) return std::rotl(a, static_cast<int>(b & 31));
    else return std::rotr(a, static_cast<int>(b & 31));
}

template <Shape S, Dest D, uint8_t O>
[[gnu::always_inline]] inline void run_fused(const Op& op, uint64_t*& sp, uint64_t* fp, const Op*& ip,
                                             const Op* code)
{
    uint32_t a;
    uint32_t b;
    const auto lo = static_cast<uint32_t>(op.b);
    const auto hi = static_cast<uint32_t>(op.b >> 32);
    if constexpr (S == Shape::ss)
    {
        b = static_cast<uint32_t>(sp[-1]);
        a = static_cast<uint32_t>(sp[-2]);
        sp -= 2;
    }
    else if constexpr (S == Shape::sk || S == Shape::sl)
    {
        a = static_cast<uint32_t>(sp[-1]);
        b = S == Shape::sk ? lo : static_cast<uint32_t>(fp[lo]);
        --sp;
    }
    else
    {
        a = static_cast<uint32_t>(fp[lo]);
        b = S == Shape::lk ? hi : static_cast<uint32_t>(fp[hi]);
    }
    const uint32_t r = i32_binop<O>(a, b);
    if constexpr (D == Dest::push || D == Dest::tee)
        *sp++ = r;
    if constexpr (D == Dest::set || D == Dest::tee)
        fp[op.a] = r;
    if constexpr (D == Dest::jump)
    {
        if (r != 0)
            ip = code + op.a;
    }
}

}  // namespace gobi::detail
