// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/allocator.hpp"
#include <gtest/gtest.h>
#include <random>

using namespace gobi;

TEST(heap_allocator, first_fit_and_reuse)
{
    HeapAllocator h{8, 1024};
    const auto a = h.allocate(16, 8);
    const auto b = h.allocate(5, 8);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(*a, 8u);
    EXPECT_EQ(*b, 24u);
    EXPECT_EQ(*h.allocation_size(*b), 8u);
    EXPECT_EQ(h.free(*a), HeapAllocator::FreeStatus::ok);
    EXPECT_EQ(h.allocate(16, 8), a);
}

TEST(heap_allocator, free_errors)
{
    HeapAllocator h{8, 1024};
    const auto a = h.allocate(16, 8);
    EXPECT_EQ(h.free(3), HeapAllocator::FreeStatus::invalid);
    EXPECT_EQ(h.free(*a + 8), HeapAllocator::FreeStatus::invalid);
    EXPECT_EQ(h.free(*a), HeapAllocator::FreeStatus::ok);
    EXPECT_EQ(h.free(*a), HeapAllocator::FreeStatus::double_free);
}

TEST(heap_allocator, alignment)
{
    HeapAllocator h{8, 4096};
    for (uint32_t align : {1u, 2u, 8u, 16u, 32u, 64u})
    {
        const auto p = h.allocate(3, align);
        ASSERT_TRUE(p);
        EXPECT_EQ(*p % std::max(align, 8u), 0u);
    }
    EXPECT_FALSE(h.allocate(8, 128));
    EXPECT_FALSE(h.allocate(8, 3));
    EXPECT_FALSE(h.allocate(0, 8));
}

TEST(heap_allocator, extend_merges_tail)
{
    HeapAllocator h{8, 64};
    EXPECT_EQ(h.tail_free(), 56u);
    EXPECT_FALSE(h.allocate(100, 8));
    h.extend(256);
    EXPECT_EQ(h.free_blocks().size(), 1u);
    EXPECT_EQ(h.tail_free(), 248u);
    EXPECT_TRUE(h.allocate(100, 8));
}

// Random malloc/free sequences keep live blocks disjoint, aligned and in the
// region; freeing everything leaves one block covering the region.
TEST(heap_allocator, soundness_property)
{
    for (uint64_t seed = 0; seed < 4; ++seed)
    {
        std::mt19937_64 rng{seed};
        HeapAllocator h{8, 1 << 20};
        std::vector<std::pair<uint32_t, uint32_t>> live;  // offset, align
        for (int step = 0; step < 10000; ++step)
        {
            if (live.empty() || rng() % 3 != 0)
            {
                const uint32_t size = 1 + static_cast<uint32_t>(rng() % 512);
                const uint32_t align = 1u << (rng() % 7);
                if (const auto p = h.allocate(size, align))
                    live.emplace_back(*p, align);
            }
            else
            {
                const size_t k = rng() % live.size();
                ASSERT_EQ(h.free(live[k].first), HeapAllocator::FreeStatus::ok);
                live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
            }
        }
        for (const auto& [offset, align] : live)
            EXPECT_EQ(offset % align, 0u);
        const auto blocks = h.live_blocks();
        ASSERT_EQ(blocks.size(), live.size());
        for (size_t i = 0; i < blocks.size(); ++i)
        {
            EXPECT_GE(blocks[i].first, h.base());
            EXPECT_LE(blocks[i].first + blocks[i].second, h.end());
            if (i + 1 < blocks.size())
            {
                EXPECT_LE(blocks[i].first + blocks[i].second, blocks[i + 1].first);
            }
        }
        for (const auto& entry : live)
            ASSERT_EQ(h.free(entry.first), HeapAllocator::FreeStatus::ok);
        const auto free_blocks = h.free_blocks();
        ASSERT_EQ(free_blocks.size(), 1u);
        EXPECT_EQ(free_blocks[0], std::make_pair(h.base(), h.end() - h.base()));
    }
}
