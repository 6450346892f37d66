// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <string_view>

namespace gobi {

enum class TrapKind : uint8_t
{
    OutOfBoundsMemory,
    OutOfBoundsTable,
    IndirectCallTypeMismatch,
    UninitializedTableElement,
    DivideByZero,
    IntegerOverflow,
    Unreachable,
    CallStackExhausted,
    FuelExhausted,
    HostError,
};

std::string_view to_string(TrapKind kind) noexcept;
std::optional<TrapKind> trap_kind_from_name(std::string_view name) noexcept;

/// A safety violation that aborted an invocation. The instance stays usable.
struct Trap
{
    TrapKind kind = TrapKind::Unreachable;
    std::string detail;
    int32_t host_code = 0;  // HostError only

    bool is_exit() const noexcept { return kind == TrapKind::HostError && detail == "exit"; }
};

/// Carrier used to unwind the interpreter. Host functions throw it to trap.
class TrapException : public std::exception
{
public:
    explicit TrapException(Trap trap) : trap_{std::move(trap)} {}
    TrapException(TrapKind kind, std::string detail) : trap_{kind, std::move(detail), 0} {}

    const Trap& trap() const noexcept { return trap_; }
    const char* what() const noexcept override { return "wasm trap"; }

private:
    Trap trap_;
};

}  // namespace gobi
