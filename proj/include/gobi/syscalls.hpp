// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/instance.hpp"
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace gobi {

/// Result codes returned to modules. The numbers are a fixed ABI.
enum class Errno : uint32_t
{
    success = 0,
    badf = 8,
    fault = 21,
    inval = 28,
    nospc = 51,
};

std::string_view to_string(Errno e) noexcept;

/// Capability set of one sandbox: only preopened descriptors, the clock and
/// the random source are reachable from module code.
///
/// Imports are provided under the "gobi_sys" namespace:
///   sys_write(fd, ptr, len, nwritten_ptr) -> errno
///   sys_read(fd, ptr, len, nread_ptr) -> errno
///   sys_clock_time(clock_id, out_ptr) -> errno   (u64 ns, 0 realtime, 1 monotonic)
///   sys_random(ptr, len) -> errno
///   sys_exit(code)                              (traps HostError "exit")
class HostEnv
{
public:
    static constexpr std::string_view import_module = "gobi_sys";
    static constexpr int32_t clock_realtime = 0;
    static constexpr int32_t clock_monotonic = 1;

    HostEnv();

    /// In-memory output; writes beyond `capacity` bytes fail with NOSPC.
    void preopen_sink(int32_t fd, size_t capacity = SIZE_MAX);
    /// In-memory input.
    void preopen_source(int32_t fd, std::vector<uint8_t> data);
    /// Host stream granted for writing (e.g. stdout). Not owned.
    void preopen_output_stream(int32_t fd, std::FILE* stream);
    /// Host stream granted for reading (e.g. stdin). Not owned.
    void preopen_input_stream(int32_t fd, std::FILE* stream);
    bool is_preopened(int32_t fd) const { return fds_.count(fd) != 0; }

    /// Bytes written so far to an in-memory sink.
    const std::vector<uint8_t>& sink(int32_t fd) const;
    std::string sink_text(int32_t fd) const;

    void set_fixed_clock(uint64_t ns) { fixed_clock_ = ns; }
    void use_real_clock() { fixed_clock_.reset(); }

    void seed_rng(uint64_t seed);
    void use_host_entropy();

    std::optional<int32_t> exit_status() const { return exit_status_; }
    void clear_exit_status() { exit_status_.reset(); }

    /// Host functions bound to this environment. The registry captures
    /// `this`; the HostEnv must outlive every instance using it.
    HostModuleRegistry imports();

    Errno sys_write(Instance& inst, int32_t fd, uint32_t ptr, uint32_t len, uint32_t nwritten_ptr);
    Errno sys_read(Instance& inst, int32_t fd, uint32_t ptr, uint32_t len, uint32_t nread_ptr);
    Errno sys_clock_time(Instance& inst, int32_t clock_id, uint32_t out_ptr);
    Errno sys_random(Instance& inst, uint32_t ptr, uint32_t len);
    [[noreturn]] void sys_exit(int32_t code);

private:
    struct Descriptor
    {
        enum class Kind { sink, source, output_stream, input_stream };
        Kind kind = Kind::sink;
        std::vector<uint8_t> buffer;
        size_t read_pos = 0;
        size_t capacity = SIZE_MAX;
        std::FILE* stream = nullptr;
    };

    void fill_random(uint8_t* out, size_t n);

    std::map<int32_t, Descriptor> fds_;
    std::optional<uint64_t> fixed_clock_;
    std::optional<std::mt19937_64> rng_;
    uint64_t rng_buffer_ = 0;
    unsigned rng_left_ = 0;  // unread bytes in rng_buffer_
    std::optional<int32_t> exit_status_;
};

}  // namespace gobi
