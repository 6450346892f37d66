// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/bench.hpp"
#include "gobi/sandbox.hpp"
#include "gobi/wat.hpp"
#include <algorithm>
#include <array>
#include <chrono>
#include <cstring>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

namespace gobi::bench {

namespace detail {
extern const std::string_view adler_wat;
extern const std::string_view requant_wat;
extern const std::string_view memrev_wat;
}  // namespace detail

namespace {

uint64_t native_adler(const uint8_t* in, uint8_t*, size_t len)
{
    constexpr uint32_t mod = 65521;
    constexpr size_t nmax = 5552;
    uint32_t a = 1;
    uint32_t b = 0;
    const size_t words = len & ~size_t{3};
    size_t i = 0;
    while (i < words)
    {
        const size_t stop = std::min(i + nmax, words);
        for (; i < stop; ++i)
        {
            a += in[i];
            b += a;
        }
        a %= mod;
        b %= mod;
    }
    for (; i < len; ++i)
    {
        a = (a + in[i]) % mod;
        b = (b + a) % mod;
    }
    return (b << 16) | a;
}

constexpr std::array<uint8_t, 256> requant_table = [] {
    std::array<uint8_t, 256> t{};
    for (uint32_t x = 0; x < 256; ++x)
        t[x] = static_cast<uint8_t>(std::min<uint32_t>(255, ((x * 205 + 1024) >> 11) * 10 + 5));
    return t;
}();

uint64_t native_requant(const uint8_t* in, uint8_t* out, size_t len)
{
    uint64_t sum = 0;
    for (size_t i = 0; i < len; ++i)
    {
        out[i] = requant_table[in[i]];
        sum += out[i];
    }
    return sum;
}

uint64_t native_memrev(const uint8_t* in, uint8_t* out, size_t len)
{
    const size_t n = len / 8;
    for (size_t k = 0; k < n; ++k)
        std::memcpy(out + 8 * k, in + 8 * (n - 1 - k), 8);
    for (size_t j = 0; j < len % 8; ++j)
        out[8 * n + j] = in[len - 1 - j];
    return n;
}

const std::array<KernelSpec, 3> kernels{{
    {"adler", detail::adler_wat, native_adler},
    {"requant", detail::requant_wat, native_requant},
    {"memrev", detail::memrev_wat, native_memrev},
}};

using Clock = std::chrono::steady_clock;

uint64_t elapsed_ns(Clock::time_point start)
{
    return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count());
}

uint64_t median(std::vector<uint64_t> v)
{
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// A sandbox holding one kernel with its buffers allocated.
struct SandboxedKernel
{
    Sandbox sb;
    SandboxPtr in;
    SandboxPtr out;
    std::array<Value, 3> args;

    SandboxedKernel(const KernelSpec& k, std::span<const uint8_t> input, BoundsStrategy strategy,
                    bool allow_unchecked)
      : sb{make(k, strategy, allow_unchecked)}
    {
        if (input.size() > UINT32_MAX / 2)
            throw BenchError{"input too large for a 32-bit sandbox"};
        const auto len = static_cast<uint32_t>(input.size());
        in = sb.copy_into(input);
        out = sb.malloc(len);
        args = {Value::i32(in.offset), Value::i32(out.offset), Value::i32(len)};
    }

    static Sandbox make(const KernelSpec& k, BoundsStrategy strategy, bool allow_unchecked)
    {
        ExecConfig config;
        config.strategy = strategy;
        config.allow_unchecked = allow_unchecked;
        return Sandbox::create(std::make_shared<const ModuleIR>(parse_wat(k.wat)), config);
    }

    uint64_t call()
    {
        const ExecutionResult r = sb.call_export("run", args);
        if (r.trap)
            throw BenchError{"kernel trapped: " + std::string{to_string(r.trap->kind)}};
        return r.values.at(0).as_u64();
    }

    uint64_t checksum_after(uint64_t result)
    {
        return checksum(sb.copy_out(out, args[2].as_u32()), result);
    }
};

std::string format_pct(double v)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
}

}  // namespace

std::span<const KernelSpec> builtin_kernels() noexcept
{
    return kernels;
}

const KernelSpec* find_kernel(std::string_view name) noexcept
{
    for (const KernelSpec& k : kernels)
        if (k.name == name)
            return &k;
    return nullptr;
}

std::vector<uint8_t> make_input(size_t size, uint64_t seed)
{
    std::mt19937_64 rng{seed};
    std::vector<uint8_t> out(size);
    for (size_t i = 0; i < size; i += 8)
    {
        const uint64_t w = rng();
        for (size_t k = 0; k < 8 && i + k < size; ++k)
            out[i + k] = static_cast<uint8_t>(w >> (8 * k));
    }
    return out;
}

uint64_t checksum(std::span<const uint8_t> out, uint64_t result) noexcept
{
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](uint8_t b) {
        h ^= b;
        h *= 0x100000001b3ull;
    };
    for (uint8_t b : out)
        mix(b);
    for (int i = 0; i < 8; ++i)
        mix(static_cast<uint8_t>(result >> (8 * i)));
    return h;
}

uint64_t native_checksum(const KernelSpec& kernel, std::span<const uint8_t> input)
{
    std::vector<uint8_t> out(input.size());
    const uint64_t r = kernel.native(input.data(), out.data(), input.size());
    return checksum(out, r);
}

uint64_t sandbox_checksum(const KernelSpec& kernel, std::span<const uint8_t> input, BoundsStrategy strategy,
                          bool allow_unchecked)
{
    SandboxedKernel sk{kernel, input, strategy, allow_unchecked};
    return sk.checksum_after(sk.call());
}

std::vector<Result> run(const Options& options)
{
    if (options.size == 0)
        throw BenchError{"size must be positive"};
    if (options.iters == 0 || options.runs == 0)
        throw BenchError{"iteration and run counts must be positive"};
    for (BoundsStrategy s : options.strategies)
        if (s == BoundsStrategy::unchecked && !options.allow_unchecked)
            throw ConfigError{"unchecked strategy requires --unsafe-unchecked"};

    std::vector<const KernelSpec*> selected;
    for (const std::string& name : options.kernels)
    {
        const KernelSpec* k = find_kernel(name);
        if (k == nullptr)
            throw BenchError{"unknown kernel " + name};
        selected.push_back(k);
    }

    const std::vector<uint8_t> input = make_input(options.size, options.seed);
    std::vector<Result> results;
    for (const KernelSpec* k : selected)
    {
        std::vector<uint8_t> out(options.size);
        uint64_t native_result = k->native(input.data(), out.data(), out.size());  // warm-up
        std::vector<uint64_t> native_times;
        for (uint32_t r = 0; r < options.runs; ++r)
        {
            const auto start = Clock::now();
            for (uint32_t i = 0; i < options.iters; ++i)
                native_result = k->native(input.data(), out.data(), out.size());
            native_times.push_back(elapsed_ns(start));
        }
        const uint64_t native_ns = median(native_times);
        const uint64_t expected = checksum(out, native_result);

        // Strategies take turns call by call, so machine drift during a run
        // lands on all of them alike. A run's time per strategy is the sum of
        // its iters calls.
        std::vector<std::unique_ptr<SandboxedKernel>> sandboxes;
        std::vector<uint64_t> last(options.strategies.size());
        std::vector<std::vector<uint64_t>> times(options.strategies.size());
        for (size_t s = 0; s < options.strategies.size(); ++s)
        {
            sandboxes.push_back(
                std::make_unique<SandboxedKernel>(*k, input, options.strategies[s], options.allow_unchecked));
            last[s] = sandboxes[s]->call();  // warm-up
        }
        for (uint32_t r = 0; r < options.runs; ++r)
        {
            std::vector<uint64_t> total(sandboxes.size());
            for (uint32_t i = 0; i < options.iters; ++i)
            {
                for (size_t s = 0; s < sandboxes.size(); ++s)
                {
                    const auto start = Clock::now();
                    last[s] = sandboxes[s]->call();
                    total[s] += elapsed_ns(start);
                }
            }
            for (size_t s = 0; s < sandboxes.size(); ++s)
                times[s].push_back(total[s]);
        }

        for (size_t s = 0; s < sandboxes.size(); ++s)
        {
            const BoundsStrategy strategy = options.strategies[s];
            const uint64_t sum = sandboxes[s]->checksum_after(last[s]);
            if (sum != expected)
                throw BenchError{std::string{k->name} + " under " + std::string{to_string(strategy)} +
                                 ": checksum mismatch with native"};

            Result res;
            res.kernel = std::string{k->name};
            res.strategy = strategy;
            res.iters = options.iters;
            res.bytes = uint64_t{options.size} * options.iters;
            res.native_ns = native_ns;
            res.sandbox_ns = median(times[s]);
            res.overhead_pct = native_ns == 0 ? 0.0
                                              : (static_cast<double>(res.sandbox_ns) - static_cast<double>(native_ns)) /
                                                    static_cast<double>(native_ns) * 100.0;
            res.checksum = sum;
            results.push_back(std::move(res));
        }
    }
    return results;
}

void write_csv(std::ostream& out, std::span<const Result> results)
{
    out << csv_header << '\n';
    for (const Result& r : results)
    {
        out << r.kernel << ',' << to_string(r.strategy) << ',' << r.iters << ',' << r.bytes << ',' << r.native_ns
            << ',' << r.sandbox_ns << ',' << format_pct(r.overhead_pct) << ",0x" << std::hex << std::setw(16)
            << std::setfill('0') << r.checksum << std::dec << std::setfill(' ') << '\n';
    }
}

}  // namespace gobi::bench
