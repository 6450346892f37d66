// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gobi {

enum class ValKind : uint8_t
{
    I32 = 0x7f,
    I64 = 0x7e,
    F32 = 0x7d,
    F64 = 0x7c,
};

std::string_view to_string(ValKind kind) noexcept;
std::optional<ValKind> val_kind_from_name(std::string_view name) noexcept;

struct FuncType
{
    std::vector<ValKind> params;
    std::vector<ValKind> results;

    friend bool operator==(const FuncType&, const FuncType&) = default;
};

std::string to_string(const FuncType& type);

/// A typed runtime scalar. The payload is stored as raw bits; floats keep
/// their exact bit pattern (including NaN payloads).
class Value
{
public:
    constexpr Value() noexcept = default;

    static constexpr Value i32(uint32_t v) noexcept { return {ValKind::I32, v}; }
    static constexpr Value i32s(int32_t v) noexcept { return i32(static_cast<uint32_t>(v)); }
    static constexpr Value i64(uint64_t v) noexcept { return {ValKind::I64, v}; }
    static constexpr Value i64s(int64_t v) noexcept { return i64(static_cast<uint64_t>(v)); }
    static Value f32(float v) noexcept { return {ValKind::F32, std::bit_cast<uint32_t>(v)}; }
    static Value f64(double v) noexcept { return {ValKind::F64, std::bit_cast<uint64_t>(v)}; }
    static constexpr Value f32_bits(uint32_t bits) noexcept { return {ValKind::F32, bits}; }
    static constexpr Value f64_bits(uint64_t bits) noexcept { return {ValKind::F64, bits}; }

    /// Reconstructs a value of `kind` from an untyped 64-bit stack slot.
    static constexpr Value from_bits(ValKind kind, uint64_t bits) noexcept
    {
        if (kind == ValKind::I32 || kind == ValKind::F32)
            bits &= 0xffffffffu;
        return {kind, bits};
    }

    /// Zero value of the given kind.
    static constexpr Value zero(ValKind kind) noexcept { return {kind, 0}; }

    constexpr ValKind kind() const noexcept { return kind_; }
    constexpr uint64_t bits() const noexcept { return bits_; }

    constexpr uint32_t as_u32() const noexcept { return static_cast<uint32_t>(bits_); }
    constexpr int32_t as_i32() const noexcept { return static_cast<int32_t>(as_u32()); }
    constexpr uint64_t as_u64() const noexcept { return bits_; }
    constexpr int64_t as_i64() const noexcept { return static_cast<int64_t>(bits_); }
    float as_f32() const noexcept { return std::bit_cast<float>(as_u32()); }
    double as_f64() const noexcept { return std::bit_cast<double>(bits_); }

    friend constexpr bool operator==(const Value&, const Value&) = default;

private:
    constexpr Value(ValKind kind, uint64_t bits) noexcept : kind_{kind}, bits_{bits} {}

    ValKind kind_ = ValKind::I32;
    uint64_t bits_ = 0;
};

/// Human readable form, e.g. "i32:5" or "f64:1.5".
std::string to_string(const Value& value);

/// Plain form used by the CLI: "5", "-1", "1.5", "nan".
std::string format_plain(const Value& value);

inline constexpr uint32_t canonical_nan32 = 0x7fc00000u;
inline constexpr uint64_t canonical_nan64 = 0x7ff8000000000000ull;

}  // namespace gobi
