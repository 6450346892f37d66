// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/allocator.hpp"
#include <bit>

namespace gobi {

namespace {
constexpr uint64_t align_up(uint64_t v, uint64_t a) noexcept
{
    return (v + a - 1) & ~(a - 1);
}
}  // namespace

HeapAllocator::HeapAllocator(uint64_t base, uint64_t end) : base_{align_up(base, granule)}, end_{end}
{
    if (end_ < base_)
        end_ = base_;
    if (end_ > base_)
        free_.emplace(base_, end_ - base_);
}

std::optional<uint32_t> HeapAllocator::allocate(uint32_t size, uint32_t align)
{
    if (size == 0 || !std::has_single_bit(align) || align > max_align)
        return std::nullopt;
    align = std::max(align, granule);
    const uint64_t need = align_up(size, granule);

    for (auto it = free_.begin(); it != free_.end(); ++it)
    {
        const uint64_t start = it->first;
        const uint64_t stop = start + it->second;
        const uint64_t at = align_up(start, align);
        if (at + need > stop)
            continue;

        free_.erase(it);
        if (at > start)
            free_.emplace(start, at - start);
        if (at + need < stop)
            free_.emplace(at + need, stop - (at + need));
        live_.emplace(at, need);
        freed_.erase(freed_.lower_bound(at), freed_.lower_bound(at + need));
        return static_cast<uint32_t>(at);
    }
    return std::nullopt;
}

HeapAllocator::FreeStatus HeapAllocator::free(uint32_t offset)
{
    const auto it = live_.find(offset);
    if (it == live_.end())
        return freed_.count(offset) != 0 ? FreeStatus::double_free : FreeStatus::invalid;
    const uint64_t length = it->second;
    live_.erase(it);
    freed_.insert(offset);
    release(offset, length);
    return FreeStatus::ok;
}

void HeapAllocator::release(uint64_t start, uint64_t length)
{
    auto next = free_.lower_bound(start);
    if (next != free_.end() && next->first == start + length)
    {
        length += next->second;
        next = free_.erase(next);
    }
    if (next != free_.begin())
    {
        auto prev = std::prev(next);
        if (prev->first + prev->second == start)
        {
            prev->second += length;
            return;
        }
    }
    free_.emplace(start, length);
}

void HeapAllocator::extend(uint64_t new_end)
{
    if (new_end <= end_)
        return;
    const uint64_t old_end = end_;
    end_ = new_end;
    release(old_end, new_end - old_end);
}

uint64_t HeapAllocator::tail_free() const noexcept
{
    if (free_.empty())
        return 0;
    const auto& [start, length] = *free_.rbegin();
    return start + length == end_ ? length : 0;
}

uint64_t HeapAllocator::free_bytes() const noexcept
{
    uint64_t total = 0;
    for (const auto& [start, length] : free_)
        total += length;
    return total;
}

std::optional<uint64_t> HeapAllocator::allocation_size(uint32_t offset) const
{
    const auto it = live_.find(offset);
    if (it == live_.end())
        return std::nullopt;
    return it->second;
}

std::vector<std::pair<uint64_t, uint64_t>> HeapAllocator::free_blocks() const
{
    return {free_.begin(), free_.end()};
}

std::vector<std::pair<uint64_t, uint64_t>> HeapAllocator::live_blocks() const
{
    return {live_.begin(), live_.end()};
}

}  // namespace gobi
