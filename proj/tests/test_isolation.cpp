// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/sandbox.hpp"
#include "test_utils.hpp"
#include <random>

using namespace gobi;
using namespace gobi::test;

namespace {

const char* const probe_module = R"((module
  (memory 1 1)
  (func (export "ld8") (param i32) (result i64) local.get 0 i64.load8_u)
  (func (export "ld16") (param i32) (result i64) local.get 0 i64.load16_u)
  (func (export "ld32") (param i32) (result i64) local.get 0 i64.load32_u)
  (func (export "ld64") (param i32) (result i64) local.get 0 i64.load)
  (func (export "ldoff") (param i32) (result i64) local.get 0 i64.load offset=65535)
  (func (export "st8") (param i32) (result i64) local.get 0 i64.const -1 i64.store8 i64.const 0)
  (func (export "st16") (param i32) (result i64) local.get 0 i64.const -1 i64.store16 i64.const 0)
  (func (export "st32") (param i32) (result i64) local.get 0 i64.const -1 i64.store32 i64.const 0)
  (func (export "st64") (param i32) (result i64) local.get 0 i64.const -1 i64.store i64.const 0)
  (func (export "stoff") (param i32) (result i64) local.get 0 i64.const -1 i64.store offset=65535 i64.const 0)))";

}  // namespace

// Accesses at or past the memory length trap and never touch the canary
// bytes on either side of the storage.
TEST(isolation, fuzzed_out_of_bounds_accesses_trap)
{
    ExecConfig config;
    config.canary_bytes = 4096;
    auto inst = instance(probe_module, config);
    static constexpr const char* probes[] = {"ld8", "ld16", "ld32", "ld64", "ldoff",
                                             "st8", "st16", "st32", "st64", "stoff"};
    std::mt19937_64 rng{2026};
    const auto length = static_cast<uint32_t>(inst->memory().size_bytes());
    int trapped = 0;
    for (int i = 0; i < 10000; ++i)
    {
        const size_t p = rng() % 10;
        uint32_t addr = 0;
        switch (rng() % 3)
        {
        case 0: addr = length + static_cast<uint32_t>(rng() % 64); break;
        case 1: addr = 0xffffffffu - static_cast<uint32_t>(rng() % 64); break;               // top of the space
        default: addr = length + static_cast<uint32_t>(rng() % (0xffffffffull - length)); break;
        }
        const ExecutionResult r = inst->invoke(probes[p], {Value::i32(addr)});
        ASSERT_TRUE(traps(r, TrapKind::OutOfBoundsMemory)) << probes[p] << " at " << addr;
        ++trapped;
    }
    EXPECT_EQ(trapped, 10000);
    EXPECT_TRUE(inst->memory().canaries_intact());
    const std::vector<uint8_t> bytes = inst->read_memory(0, length);
    EXPECT_TRUE(std::all_of(bytes.begin(), bytes.end(), [](uint8_t b) { return b == 0; }));
}

// Four callback signatures against four call_indirect types: only the
// matching pair dispatches.
TEST(isolation, callback_signature_matrix)
{
    Sandbox sb = Sandbox::create(wat(R"((module
      (type $a (func (param i32) (result i32)))
      (type $b (func (param i64) (result i64)))
      (type $c (func (param f32) (result f32)))
      (type $d (func (param i32 i32) (result i32)))
      (memory 1)
      (table 0 funcref)
      (func (export "via_a") (param $slot i32) (result i32)
        i32.const 10 local.get $slot call_indirect (type $a))
      (func (export "via_b") (param $slot i32) (result i32)
        i64.const 10 local.get $slot call_indirect (type $b) i32.wrap_i64)
      (func (export "via_c") (param $slot i32) (result i32)
        f32.const 10 local.get $slot call_indirect (type $c) i32.trunc_f32_s)
      (func (export "via_d") (param $slot i32) (result i32)
        i32.const 10 i32.const 20 local.get $slot call_indirect (type $d))))"));

    const FuncType sigs[] = {
        {{ValKind::I32}, {ValKind::I32}},
        {{ValKind::I64}, {ValKind::I64}},
        {{ValKind::F32}, {ValKind::F32}},
        {{ValKind::I32, ValKind::I32}, {ValKind::I32}},
    };
    std::vector<CallbackHandle> handles;
    handles.push_back(sb.register_callback(sigs[0], [](Instance&, std::span<const Value> a) {
        return std::vector{Value::i32(a[0].as_u32() + 1)};
    }));
    handles.push_back(sb.register_callback(sigs[1], [](Instance&, std::span<const Value> a) {
        return std::vector{Value::i64(a[0].as_u64() + 2)};
    }));
    handles.push_back(sb.register_callback(sigs[2], [](Instance&, std::span<const Value> a) {
        return std::vector{Value::f32(a[0].as_f32() + 3)};
    }));
    handles.push_back(sb.register_callback(sigs[3], [](Instance&, std::span<const Value> a) {
        return std::vector{Value::i32(a[0].as_u32() + a[1].as_u32() + 4)};
    }));
    const uint32_t expected[] = {11, 12, 13, 34};
    static constexpr const char* callers[] = {"via_a", "via_b", "via_c", "via_d"};
    for (size_t cb = 0; cb < 4; ++cb)
    {
        for (size_t t = 0; t < 4; ++t)
        {
            const ExecutionResult r = sb.call_export(callers[t], {Value::i32(handles[cb].slot)});
            if (cb == t)
                EXPECT_TRUE(returns(r, {Value::i32(expected[cb])})) << cb << ' ' << t;
            else
                EXPECT_TRUE(traps(r, TrapKind::IndirectCallTypeMismatch)) << cb << ' ' << t;
        }
    }
}

// Accesses that begin inside memory but end past it trap as a whole and
// leave the in-bounds prefix unwritten.
TEST(isolation, straddling_accesses_trap)
{
    ExecConfig config;
    config.canary_bytes = 64;
    auto inst = instance(probe_module, config);
    const auto length = static_cast<uint32_t>(inst->memory().size_bytes());
    static constexpr std::pair<const char*, uint32_t> probes[] = {{"st16", 2}, {"st32", 4}, {"st64", 8},
                                                                   {"ld16", 2}, {"ld32", 4}, {"ld64", 8}};
    for (const auto& [name, width] : probes)
        for (uint32_t back = 1; back < width; ++back)
            EXPECT_TRUE(traps(inst->invoke(name, {Value::i32(length - back)}), TrapKind::OutOfBoundsMemory))
                << name << ' ' << back;
    EXPECT_TRUE(inst->memory().canaries_intact());
    EXPECT_EQ(inst->read_memory(length - 8, 8), std::vector<uint8_t>(8, 0));
    EXPECT_TRUE(returns(inst->invoke("st64", {Value::i32(length - 8)}), {Value::i64(0)}));
    EXPECT_TRUE(returns(inst->invoke("ld64", {Value::i32(length - 8)}), {Value::i64(-1)}));
}
