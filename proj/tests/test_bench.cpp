// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/bench.hpp"
#include "gobi/errors.hpp"
#include <gtest/gtest.h>
#include <sstream>

using namespace gobi;
using namespace gobi::bench;

TEST(bench, kernels_agree_with_native)
{
    // Odd sizes exercise the scalar tails of every kernel.
    for (size_t size : {1u, 7u, 8u, 9u, 4095u, 5553u, 70001u})
    {
        const std::vector<uint8_t> input = make_input(size, size);
        for (const KernelSpec& k : builtin_kernels())
        {
            const uint64_t want = native_checksum(k, input);
            EXPECT_EQ(sandbox_checksum(k, input, BoundsStrategy::checked), want) << k.name << ' ' << size;
            EXPECT_EQ(sandbox_checksum(k, input, BoundsStrategy::masked), want) << k.name << ' ' << size;
            EXPECT_EQ(sandbox_checksum(k, input, BoundsStrategy::unchecked, true), want) << k.name << ' ' << size;
        }
    }
}

TEST(bench, input_is_seeded)
{
    EXPECT_EQ(make_input(100, 3), make_input(100, 3));
    EXPECT_NE(make_input(100, 3), make_input(100, 4));
    EXPECT_EQ(make_input(13, 3).size(), 13u);
}

TEST(bench, checksum_covers_output_and_result)
{
    const std::vector<uint8_t> a{1, 2, 3};
    EXPECT_EQ(checksum({}, 0), 0xa8c7f832281a39c5ull);  // FNV-1a-64 of eight zero bytes
    EXPECT_NE(checksum(a, 0), checksum(a, 1));
    EXPECT_NE(checksum(a, 0), checksum(std::vector<uint8_t>{1, 2, 4}, 0));
}

TEST(bench, run_and_csv)
{
    Options o;
    o.kernels = {"adler", "memrev"};
    o.size = 4096;
    o.iters = 2;
    o.runs = 1;
    o.strategies = {BoundsStrategy::checked, BoundsStrategy::masked};
    const std::vector<Result> results = run(o);
    ASSERT_EQ(results.size(), 4u);
    EXPECT_EQ(results[0].kernel, "adler");
    EXPECT_EQ(results[1].strategy, BoundsStrategy::masked);
    EXPECT_EQ(results[0].checksum, results[1].checksum);
    EXPECT_EQ(results[0].bytes, 8192u);

    std::ostringstream csv;
    write_csv(csv, results);
    std::istringstream lines{csv.str()};
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, csv_header);
    int rows = 0;
    while (std::getline(lines, line))
    {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
        ++rows;
    }
    EXPECT_EQ(rows, 4);
}

TEST(bench, option_errors)
{
    Options o;
    o.kernels = {"adler"};
    o.size = 64;
    o.iters = 1;
    o.strategies = {BoundsStrategy::unchecked};
    EXPECT_THROW(run(o), ConfigError);
    o.strategies = {BoundsStrategy::checked};
    o.kernels = {"nope"};
    EXPECT_THROW(run(o), BenchError);
    o.kernels = {"adler"};
    o.size = 0;
    EXPECT_THROW(run(o), BenchError);
    o.size = 64;
    o.iters = 0;
    EXPECT_THROW(run(o), BenchError);
}
