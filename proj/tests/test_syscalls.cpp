// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/sandbox.hpp"
#include "test_utils.hpp"

using namespace gobi;
using namespace gobi::test;

namespace {

// Thin exports forwarding straight to the syscalls.
const char* const shim_module = R"((module
  (import "gobi_sys" "sys_write" (func $write (param i32 i32 i32 i32) (result i32)))
  (import "gobi_sys" "sys_read" (func $read (param i32 i32 i32 i32) (result i32)))
  (import "gobi_sys" "sys_clock_time" (func $clock (param i32 i32) (result i32)))
  (import "gobi_sys" "sys_random" (func $random (param i32 i32) (result i32)))
  (import "gobi_sys" "sys_exit" (func $exit (param i32)))
  (memory (export "memory") 1)
  (data (i32.const 16) "ok")
  (func (export "write") (param i32 i32 i32 i32) (result i32)
    local.get 0 local.get 1 local.get 2 local.get 3 call $write)
  (func (export "read") (param i32 i32 i32 i32) (result i32)
    local.get 0 local.get 1 local.get 2 local.get 3 call $read)
  (func (export "clock") (param i32 i32) (result i32)
    local.get 0 local.get 1 call $clock)
  (func (export "random") (param i32 i32) (result i32)
    local.get 0 local.get 1 call $random)
  (func (export "exit") (param i32)
    local.get 0 call $exit)
  (func (export "nop") (result i32) i32.const 7)))";

struct Shim
{
    std::shared_ptr<HostEnv> env = std::make_shared<HostEnv>();
    Sandbox sb;

    explicit Shim(std::shared_ptr<HostEnv> e) : env{e}, sb{Sandbox::create(wat(shim_module), {}, e)} {}
    Shim() : Shim(std::make_shared<HostEnv>()) {}

    uint32_t u32_at(uint32_t offset)
    {
        const auto b = sb.copy_out(SandboxPtr{offset}, 4);
        return b[0] | b[1] << 8 | b[2] << 16 | uint32_t{b[3]} << 24;
    }
};

Value errno_of(Errno e)
{
    return Value::i32(static_cast<uint32_t>(e));
}

}  // namespace

TEST(sys_write, appends_to_sink)
{
    Shim s;
    s.env->preopen_sink(1);
    EXPECT_TRUE(returns(s.sb.call_export("write", {Value::i32(1), Value::i32(16), Value::i32(2), Value::i32(32)}),
                        {errno_of(Errno::success)}));
    EXPECT_EQ(s.env->sink_text(1), "ok");
    EXPECT_EQ(s.u32_at(32), 2u);
}

TEST(sys_write, unknown_fd_is_badf)
{
    Shim s;
    s.env->preopen_sink(1);
    EXPECT_TRUE(returns(s.sb.call_export("write", {Value::i32(7), Value::i32(16), Value::i32(2), Value::i32(32)}),
                        {errno_of(Errno::badf)}));
    EXPECT_TRUE(s.env->sink(1).empty());
}

TEST(sys_write, fault_has_no_effect)
{
    Shim s;
    s.env->preopen_sink(1);
    s.sb.instance().write_memory(32, std::vector<uint8_t>{9, 9, 9, 9});
    // Data range spans the end of memory.
    EXPECT_TRUE(returns(s.sb.call_export("write", {Value::i32(1), Value::i32(65530), Value::i32(8), Value::i32(32)}),
                        {errno_of(Errno::fault)}));
    // Result pointer out of bounds.
    EXPECT_TRUE(returns(s.sb.call_export("write", {Value::i32(1), Value::i32(16), Value::i32(2), Value::i32(65534)}),
                        {errno_of(Errno::fault)}));
    EXPECT_TRUE(s.env->sink(1).empty());
    EXPECT_EQ(s.u32_at(32), 0x09090909u);
}

TEST(sys_write, capacity_gives_nospc)
{
    Shim s;
    s.env->preopen_sink(2, 3);
    const auto args = {Value::i32(2), Value::i32(16), Value::i32(2), Value::i32(32)};
    EXPECT_TRUE(returns(s.sb.call_export("write", args), {errno_of(Errno::success)}));
    EXPECT_TRUE(returns(s.sb.call_export("write", args), {errno_of(Errno::nospc)}));
    EXPECT_EQ(s.env->sink_text(2), "ok");
}

TEST(sys_read, reads_and_reaches_eof)
{
    Shim s;
    s.env->preopen_source(0, {'a', 'b', 'c'});
    const auto args = {Value::i32(0), Value::i32(100), Value::i32(2), Value::i32(200)};
    EXPECT_TRUE(returns(s.sb.call_export("read", args), {errno_of(Errno::success)}));
    EXPECT_EQ(s.sb.copy_out(SandboxPtr{100}, 2), (std::vector<uint8_t>{'a', 'b'}));
    EXPECT_EQ(s.u32_at(200), 2u);
    EXPECT_TRUE(returns(s.sb.call_export("read", args), {errno_of(Errno::success)}));
    EXPECT_EQ(s.u32_at(200), 1u);
    EXPECT_TRUE(returns(s.sb.call_export("read", args), {errno_of(Errno::success)}));
    EXPECT_EQ(s.u32_at(200), 0u);
}

TEST(sys_read, errors)
{
    Shim s;
    s.env->preopen_source(0, {'a'});
    s.env->preopen_sink(1);
    EXPECT_TRUE(returns(s.sb.call_export("read", {Value::i32(0), Value::i32(65535), Value::i32(2), Value::i32(0)}),
                        {errno_of(Errno::fault)}));
    EXPECT_TRUE(returns(s.sb.call_export("read", {Value::i32(1), Value::i32(0), Value::i32(2), Value::i32(8)}),
                        {errno_of(Errno::badf)}));
    EXPECT_TRUE(returns(s.sb.call_export("read", {Value::i32(5), Value::i32(0), Value::i32(2), Value::i32(8)}),
                        {errno_of(Errno::badf)}));
}

TEST(sys_clock_time, fixed_clock)
{
    Shim s;
    s.env->set_fixed_clock(1000);
    EXPECT_TRUE(returns(s.sb.call_export("clock", {Value::i32(0), Value::i32(64)}), {errno_of(Errno::success)}));
    EXPECT_EQ(s.sb.copy_out(SandboxPtr{64}, 8), (std::vector<uint8_t>{0xe8, 0x03, 0, 0, 0, 0, 0, 0}));
    EXPECT_TRUE(returns(s.sb.call_export("clock", {Value::i32(0), Value::i32(65532)}), {errno_of(Errno::fault)}));
    EXPECT_TRUE(returns(s.sb.call_export("clock", {Value::i32(9), Value::i32(64)}), {errno_of(Errno::inval)}));
}

TEST(sys_clock_time, real_clock_moves)
{
    Shim s;
    ASSERT_TRUE(returns(s.sb.call_export("clock", {Value::i32(1), Value::i32(64)}), {errno_of(Errno::success)}));
    const auto first = s.sb.copy_out(SandboxPtr{64}, 8);
    EXPECT_NE(first, std::vector<uint8_t>(8, 0));
}

// Expected bytes come from an independent mt19937_64 implementation: the
// little-endian bytes of the first outputs for seed 42.
TEST(sys_random, seeded_stream_is_pinned)
{
    Shim s;
    s.env->seed_rng(42);
    EXPECT_TRUE(returns(s.sb.call_export("random", {Value::i32(100), Value::i32(4)}), {errno_of(Errno::success)}));
    EXPECT_EQ(to_hex(s.sb.copy_out(SandboxPtr{100}, 4)), "d6e2e56e");
    EXPECT_TRUE(returns(s.sb.call_export("random", {Value::i32(104), Value::i32(8)}), {errno_of(Errno::success)}));
    EXPECT_EQ(to_hex(s.sb.copy_out(SandboxPtr{100}, 12)), "d6e2e56e7ddf51c1a80225b9");
}

TEST(sys_random, zero_length_and_fault)
{
    Shim s;
    s.env->seed_rng(42);
    EXPECT_TRUE(returns(s.sb.call_export("random", {Value::i32(100), Value::i32(0)}), {errno_of(Errno::success)}));
    EXPECT_EQ(s.sb.copy_out(SandboxPtr{100}, 4), std::vector<uint8_t>(4, 0));
    EXPECT_TRUE(returns(s.sb.call_export("random", {Value::i32(65533), Value::i32(4)}), {errno_of(Errno::fault)}));
    // The failed call consumed nothing from the stream.
    EXPECT_TRUE(returns(s.sb.call_export("random", {Value::i32(100), Value::i32(4)}), {errno_of(Errno::success)}));
    EXPECT_EQ(to_hex(s.sb.copy_out(SandboxPtr{100}, 4)), "d6e2e56e");
}

TEST(sys_exit, traps_with_status_and_sandbox_survives)
{
    for (int32_t code : {0, 3})
    {
        Shim s;
        const ExecutionResult r = s.sb.call_export("exit", {Value::i32s(code)});
        ASSERT_TRUE(traps(r, TrapKind::HostError));
        EXPECT_TRUE(r.trap->is_exit());
        EXPECT_EQ(r.trap->host_code, code);
        EXPECT_EQ(s.env->exit_status(), code);
        EXPECT_TRUE(returns(s.sb.call_export("nop", {}), {Value::i32(7)}));
    }
}

// A module probing every fd in 0..255 sees BADF everywhere except preopens.
TEST(syscall_confinement, hostile_fd_probe)
{
    auto env = std::make_shared<HostEnv>();
    env->preopen_sink(1);
    env->preopen_source(0, {'x'});
    Sandbox sb = Sandbox::create(wat(R"((module
      (import "gobi_sys" "sys_write" (func $write (param i32 i32 i32 i32) (result i32)))
      (import "gobi_sys" "sys_read" (func $read (param i32 i32 i32 i32) (result i32)))
      (memory 1)
      (func (export "probe") (param $fd i32) (result i32)
        local.get $fd i32.const 0 i32.const 1 i32.const 8 call $write
        i32.const 8 i32.shl
        local.get $fd i32.const 0 i32.const 0 i32.const 8 call $read
        i32.or)))"),
                                 {}, env);
    for (uint32_t fd = 0; fd < 256; ++fd)
    {
        const ExecutionResult r = sb.call_export("probe", {Value::i32(fd)});
        ASSERT_FALSE(r.trapped());
        const uint32_t write_errno = r.values[0].as_u32() >> 8;
        const uint32_t read_errno = r.values[0].as_u32() & 0xff;
        EXPECT_EQ(write_errno, fd == 1 ? 0u : 8u) << fd;
        EXPECT_EQ(read_errno, fd == 0 ? 0u : 8u) << fd;
    }
    EXPECT_EQ(env->sink(1).size(), 1u);
}
