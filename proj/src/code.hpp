// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/module.hpp"
#include <cstdint>
#include <span>
#include <vector>

namespace gobi::detail {

/// Internal op codes. Values below 0x100 are the Wasm opcode with the same
/// encoding; structured control flow is lowered to the jumps below.
enum XOp : uint16_t
{
    x_jump = 0x100,    // pc = a
    x_jump_if,         // pop c; if c: pc = a
    x_jump_unless,     // pop c; if !c: pc = a
    x_br,              // keep b>>32 values, reset height to (uint32)b, pc = a
    x_br_if,           // pop c; if c: x_br
    x_br_table,        // pop i; targets[a + min(i, b)]
    x_return,          // explicit return
    x_end,             // function end: height must be exactly the result count
    x_call,            // a = defined function index, b = params | results << 32
    x_call_host,       // a = imported function index, b as above
    x_call_indirect,   // a = signature id, b as above
    x_count,
};

struct Op
{
    uint16_t code = 0;
    uint32_t a = 0;
    uint64_t b = 0;
};

struct BrTarget
{
    uint32_t pc = 0;
    uint32_t height = 0;  // operand height relative to the frame's operand base
    uint32_t arity = 0;
};

struct CompiledFunction
{
    uint32_t num_params = 0;
    uint32_t num_results = 0;
    uint32_t num_locals = 0;  // excluding params
    uint32_t max_height = 0;  // operand stack high-water mark
    std::vector<Op> code;
    std::vector<BrTarget> targets;
};

struct CompiledCode
{
    std::vector<CompiledFunction> functions;  // defined functions, in module order
};

/// Lowers every defined function of a validated module. `type_sig` maps
/// module type indices to canonical signature ids for call_indirect.
/// The returned op codes are interpreter dispatch slots.
CompiledCode compile(const ModuleIR& module, std::span<const uint32_t> type_sig);

/// Rewrites internal op codes to interpreter dispatch slots.
void bind_handlers(CompiledCode& code);

}  // namespace gobi::detail
