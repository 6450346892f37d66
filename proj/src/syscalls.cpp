// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/syscalls.hpp"
#include "gobi/errors.hpp"
#include <chrono>
#include <cstring>

namespace gobi {

namespace {

Value errno_value(Errno e)
{
    return Value::i32(static_cast<uint32_t>(e));
}

// Both ranges must be in bounds before any side effect.
bool in_bounds(const Instance& inst, uint32_t ptr, uint64_t len)
{
    return inst.has_memory() && inst.memory().in_bounds(ptr, len);
}

void store_u32(Instance& inst, uint32_t ptr, uint32_t v)
{
    uint8_t bytes[4];
    for (int i = 0; i < 4; ++i)
        bytes[i] = static_cast<uint8_t>(v >> (8 * i));
    inst.memory().write(ptr, bytes);
}

void store_u64(Instance& inst, uint32_t ptr, uint64_t v)
{
    uint8_t bytes[8];
    for (int i = 0; i < 8; ++i)
        bytes[i] = static_cast<uint8_t>(v >> (8 * i));
    inst.memory().write(ptr, bytes);
}

}  // namespace

std::string_view to_string(Errno e) noexcept
{
    switch (e)
    {
    case Errno::success: return "SUCCESS";
    case Errno::badf: return "BADF";
    case Errno::fault: return "FAULT";
    case Errno::inval: return "INVAL";
    case Errno::nospc: return "NOSPC";
    }
    return "?";
}

HostEnv::HostEnv() = default;

void HostEnv::preopen_sink(int32_t fd, size_t capacity)
{
    Descriptor d;
    d.kind = Descriptor::Kind::sink;
    d.capacity = capacity;
    fds_[fd] = std::move(d);
}

void HostEnv::preopen_source(int32_t fd, std::vector<uint8_t> data)
{
    Descriptor d;
    d.kind = Descriptor::Kind::source;
    d.buffer = std::move(data);
    fds_[fd] = std::move(d);
}

void HostEnv::preopen_output_stream(int32_t fd, std::FILE* stream)
{
    Descriptor d;
    d.kind = Descriptor::Kind::output_stream;
    d.stream = stream;
    fds_[fd] = std::move(d);
}

void HostEnv::preopen_input_stream(int32_t fd, std::FILE* stream)
{
    Descriptor d;
    d.kind = Descriptor::Kind::input_stream;
    d.stream = stream;
    fds_[fd] = std::move(d);
}

const std::vector<uint8_t>& HostEnv::sink(int32_t fd) const
{
    const auto it = fds_.find(fd);
    if (it == fds_.end() || it->second.kind != Descriptor::Kind::sink)
        throw Error{"fd " + std::to_string(fd) + " is not an in-memory sink"};
    return it->second.buffer;
}

std::string HostEnv::sink_text(int32_t fd) const
{
    const auto& bytes = sink(fd);
    return {bytes.begin(), bytes.end()};
}

void HostEnv::seed_rng(uint64_t seed)
{
    rng_.emplace(seed);
    rng_left_ = 0;
}

void HostEnv::use_host_entropy()
{
    rng_.reset();
    rng_left_ = 0;
}

void HostEnv::fill_random(uint8_t* out, size_t n)
{
    if (!rng_)
    {
        std::random_device dev;
        for (size_t i = 0; i < n; ++i)
            out[i] = static_cast<uint8_t>(dev());
        return;
    }
    // The seeded stream is the little-endian byte sequence of successive
    // 64-bit outputs; partial words carry over to the next call.
    for (size_t i = 0; i < n; ++i)
    {
        if (rng_left_ == 0)
        {
            rng_buffer_ = (*rng_)();
            rng_left_ = 8;
        }
        out[i] = static_cast<uint8_t>(rng_buffer_);
        rng_buffer_ >>= 8;
        --rng_left_;
    }
}

Errno HostEnv::sys_write(Instance& inst, int32_t fd, uint32_t ptr, uint32_t len, uint32_t nwritten_ptr)
{
    const auto it = fds_.find(fd);
    if (it == fds_.end())
        return Errno::badf;
    Descriptor& d = it->second;
    if (d.kind != Descriptor::Kind::sink && d.kind != Descriptor::Kind::output_stream)
        return Errno::badf;
    if (!in_bounds(inst, ptr, len) || !in_bounds(inst, nwritten_ptr, 4))
        return Errno::fault;

    const uint8_t* src = inst.memory().data() + ptr;
    if (d.kind == Descriptor::Kind::sink)
    {
        if (len > d.capacity - d.buffer.size())
            return Errno::nospc;
        d.buffer.insert(d.buffer.end(), src, src + len);
    }
    else
    {
        if (len != 0 && std::fwrite(src, 1, len, d.stream) != len)
            return Errno::nospc;
        std::fflush(d.stream);
    }
    store_u32(inst, nwritten_ptr, len);
    return Errno::success;
}

Errno HostEnv::sys_read(Instance& inst, int32_t fd, uint32_t ptr, uint32_t len, uint32_t nread_ptr)
{
    const auto it = fds_.find(fd);
    if (it == fds_.end())
        return Errno::badf;
    Descriptor& d = it->second;
    if (d.kind != Descriptor::Kind::source && d.kind != Descriptor::Kind::input_stream)
        return Errno::badf;
    if (!in_bounds(inst, ptr, len) || !in_bounds(inst, nread_ptr, 4))
        return Errno::fault;

    uint8_t* dst = inst.memory().data() + ptr;
    size_t n;
    if (d.kind == Descriptor::Kind::source)
    {
        n = std::min<size_t>(len, d.buffer.size() - d.read_pos);
        if (n != 0)
            std::memcpy(dst, d.buffer.data() + d.read_pos, n);
        d.read_pos += n;
    }
    else
    {
        n = len == 0 ? 0 : std::fread(dst, 1, len, d.stream);
    }
    store_u32(inst, nread_ptr, static_cast<uint32_t>(n));
    return Errno::success;
}

Errno HostEnv::sys_clock_time(Instance& inst, int32_t clock_id, uint32_t out_ptr)
{
    if (clock_id != clock_realtime && clock_id != clock_monotonic)
        return Errno::inval;
    if (!in_bounds(inst, out_ptr, 8))
        return Errno::fault;
    uint64_t ns;
    if (fixed_clock_)
        ns = *fixed_clock_;
    else if (clock_id == clock_realtime)
        ns = static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                       std::chrono::system_clock::now().time_since_epoch())
                                       .count());
    else
        ns = static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                       std::chrono::steady_clock::now().time_since_epoch())
                                       .count());
    store_u64(inst, out_ptr, ns);
    return Errno::success;
}

Errno HostEnv::sys_random(Instance& inst, uint32_t ptr, uint32_t len)
{
    if (!in_bounds(inst, ptr, len))
        return Errno::fault;
    if (len != 0)
        fill_random(inst.memory().data() + ptr, len);
    return Errno::success;
}

void HostEnv::sys_exit(int32_t code)
{
    exit_status_ = code;
    throw TrapException{Trap{TrapKind::HostError, "exit", code}};
}

HostModuleRegistry HostEnv::imports()
{
    using enum ValKind;
    const std::string ns{import_module};
    HostModuleRegistry r;
    r.add_function(ns, "sys_write", FuncType{{I32, I32, I32, I32}, {I32}},
                   [this](Instance& inst, std::span<const Value> a) {
                       return std::vector{errno_value(
                           sys_write(inst, a[0].as_i32(), a[1].as_u32(), a[2].as_u32(), a[3].as_u32()))};
                   });
    r.add_function(ns, "sys_read", FuncType{{I32, I32, I32, I32}, {I32}},
                   [this](Instance& inst, std::span<const Value> a) {
                       return std::vector{errno_value(
                           sys_read(inst, a[0].as_i32(), a[1].as_u32(), a[2].as_u32(), a[3].as_u32()))};
                   });
    r.add_function(ns, "sys_clock_time", FuncType{{I32, I32}, {I32}},
                   [this](Instance& inst, std::span<const Value> a) {
                       return std::vector{errno_value(sys_clock_time(inst, a[0].as_i32(), a[1].as_u32()))};
                   });
    r.add_function(ns, "sys_random", FuncType{{I32, I32}, {I32}},
                   [this](Instance& inst, std::span<const Value> a) {
                       return std::vector{errno_value(sys_random(inst, a[0].as_u32(), a[1].as_u32()))};
                   });
    r.add_function(ns, "sys_exit", FuncType{{I32}, {}},
                   [this](Instance&, std::span<const Value> a) -> std::vector<Value> { sys_exit(a[0].as_i32()); });
    return r;
}

}  // namespace gobi
