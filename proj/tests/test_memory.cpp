// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/memory.hpp"
#include <gtest/gtest.h>
#include <algorithm>
#include <random>

using namespace gobi;

TEST(effective_address, checked_bounds)
{
    LinearMemory mem{1, std::nullopt, BoundsStrategy::checked};
    EXPECT_EQ(effective_address(mem, 65532, 0, 4), 65532u);
    EXPECT_EQ(effective_address(mem, 65533, 0, 4), std::nullopt);
    EXPECT_EQ(effective_address(mem, 65535, 0, 1), 65535u);
    EXPECT_EQ(effective_address(mem, 65536, 0, 1), std::nullopt);
    EXPECT_EQ(effective_address(mem, 0xffffffff, 0xffffffff, 8), std::nullopt);
    EXPECT_EQ(effective_address(mem, 1, 0xffffffff, 1), std::nullopt);
}

TEST(effective_address, masked_wraps)
{
    LinearMemory mem{1, std::nullopt, BoundsStrategy::masked};
    EXPECT_EQ(mem.capacity(), 65536u);
    EXPECT_EQ(effective_address(mem, 65540, 0, 4), 4u);
    EXPECT_EQ(effective_address(mem, 0xffffffff, 1, 1), 0u);
    // Straddling the capacity end still traps.
    EXPECT_EQ(effective_address(mem, 65534, 0, 4), std::nullopt);
}

TEST(effective_address, unchecked_passthrough)
{
    LinearMemory mem{1, std::nullopt, BoundsStrategy::unchecked};
    EXPECT_EQ(effective_address(mem, 70000, 6, 4), 70006u);
}

TEST(effective_address, strategies_agree_in_bounds)
{
    LinearMemory checked{3, std::nullopt, BoundsStrategy::checked};
    LinearMemory masked{3, std::nullopt, BoundsStrategy::masked};
    LinearMemory unchecked{3, std::nullopt, BoundsStrategy::unchecked};
    EXPECT_EQ(masked.capacity(), 4u * 65536u);
    std::mt19937 rng{7};
    for (int i = 0; i < 100000; ++i)
    {
        const uint32_t width = 1u << (rng() % 4);
        const uint32_t base = rng() % (3 * 65536);
        const uint32_t offset = rng() % 64;
        const auto c = effective_address(checked, base, offset, width);
        if (!c)
            continue;
        EXPECT_EQ(effective_address(masked, base, offset, width), c);
        EXPECT_EQ(effective_address(unchecked, base, offset, width), c);
    }
}

TEST(linear_memory, grow)
{
    LinearMemory mem{1, 4, BoundsStrategy::checked};
    mem.bytes()[100] = 7;
    EXPECT_EQ(mem.grow(1), 1u);
    EXPECT_EQ(mem.size_pages(), 2u);
    EXPECT_EQ(mem.size_bytes(), 2u * 65536u);
    EXPECT_EQ(mem.bytes()[100], 7);
    EXPECT_TRUE(std::all_of(mem.bytes().begin() + 65536, mem.bytes().end(), [](uint8_t b) { return b == 0; }));
    EXPECT_EQ(mem.grow(10), grow_failed);
    EXPECT_EQ(mem.size_pages(), 2u);
    EXPECT_EQ(mem.grow(0), 2u);
    EXPECT_EQ(mem.grow(2), 2u);
    EXPECT_EQ(mem.grow(1), grow_failed);
}

TEST(linear_memory, masked_capacity_power_of_two)
{
    LinearMemory mem{0, std::nullopt, BoundsStrategy::masked};
    EXPECT_EQ(mem.capacity(), 65536u);
    for (uint32_t pages = 1; pages < 20; ++pages)
    {
        mem.grow(1);
        EXPECT_TRUE(std::has_single_bit(mem.capacity()));
        EXPECT_GE(mem.capacity(), mem.size_bytes());
    }
}

TEST(linear_memory, masked_grow_zeroes_tail)
{
    LinearMemory mem{3, std::nullopt, BoundsStrategy::masked};
    // The masked tail beyond the length is sandbox-owned scratch.
    mem.data()[3 * 65536 + 10] = 0xee;
    EXPECT_EQ(mem.grow(1), 3u);
    EXPECT_EQ(mem.bytes()[3 * 65536 + 10], 0);
}

TEST(linear_memory, host_access)
{
    LinearMemory mem{1, std::nullopt, BoundsStrategy::checked};
    const uint8_t abc[] = {'a', 'b', 'c'};
    mem.write(0, abc);
    uint8_t out[3] = {};
    mem.read(0, out);
    EXPECT_TRUE(std::equal(std::begin(out), std::end(out), std::begin(abc)));

    const uint8_t four[] = {1, 2, 3, 4};
    EXPECT_THROW(mem.write(65534, four), OutOfBoundsError);
    EXPECT_EQ(mem.bytes()[65534], 0);
    EXPECT_EQ(mem.bytes()[65535], 0);

    std::span<uint8_t> empty;
    EXPECT_NO_THROW(mem.read(65536, empty));
}

TEST(linear_memory, canaries)
{
    LinearMemory mem{1, std::nullopt, BoundsStrategy::checked, 4096};
    EXPECT_TRUE(mem.canaries_intact());
    mem.grow(1);
    EXPECT_TRUE(mem.canaries_intact());
    mem.data()[-1] = 0;
    EXPECT_FALSE(mem.canaries_intact());
}
