// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/errors.hpp"
#include "gobi/memory.hpp"
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gobi::bench {

/// Checksum mismatch between native and sandboxed runs, or bad options.
class BenchError : public Error
{
public:
    using Error::Error;
};

/// A byte-transform kernel with a native reference and a module computing
/// the same function. Module ABI: export "run"(in, out, len) -> i64.
struct KernelSpec
{
    std::string_view name;
    std::string_view wat;
    uint64_t (*native)(const uint8_t* in, uint8_t* out, size_t len);
};

std::span<const KernelSpec> builtin_kernels() noexcept;
/// Null when unknown.
const KernelSpec* find_kernel(std::string_view name) noexcept;

/// Seeded input bytes (mt19937_64, little-endian words).
std::vector<uint8_t> make_input(size_t size, uint64_t seed);

/// FNV-1a 64 over the output bytes followed by the 8 LE bytes of the result.
uint64_t checksum(std::span<const uint8_t> out, uint64_t result) noexcept;

struct Options
{
    std::vector<std::string> kernels;
    size_t size = 1 << 20;
    uint32_t iters = 100;
    std::vector<BoundsStrategy> strategies{BoundsStrategy::checked};
    bool allow_unchecked = false;
    uint64_t seed = 1;
    uint32_t runs = 3;  // timed repetitions of the iteration loop; median reported
};

struct Result
{
    std::string kernel;
    BoundsStrategy strategy = BoundsStrategy::checked;
    uint32_t iters = 0;
    uint64_t bytes = 0;  // input bytes processed per timed run (size * iters)
    uint64_t native_ns = 0;
    uint64_t sandbox_ns = 0;
    double overhead_pct = 0;
    uint64_t checksum = 0;
};

inline constexpr std::string_view csv_header =
    "kernel,strategy,iters,bytes,native_ns,sandbox_ns,overhead_pct,checksum";

/// Runs every kernel natively and under each strategy. Throws BenchError on
/// a checksum disagreement or invalid options, ConfigError when unchecked
/// is requested without allow_unchecked.
std::vector<Result> run(const Options& options);

/// One sandboxed invocation of `kernel` on `input`; returns the checksum.
uint64_t sandbox_checksum(const KernelSpec& kernel, std::span<const uint8_t> input, BoundsStrategy strategy,
                          bool allow_unchecked = false);
uint64_t native_checksum(const KernelSpec& kernel, std::span<const uint8_t> input);

void write_csv(std::ostream& out, std::span<const Result> results);

}  // namespace gobi::bench
