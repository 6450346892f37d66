// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/memory.hpp"
#include "gobi/trap.hpp"
#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <new>

namespace gobi {

namespace {
constexpr std::array<std::string_view, 10> trap_names = {
    "OutOfBoundsMemory",
    "OutOfBoundsTable",
    "IndirectCallTypeMismatch",
    "UninitializedTableElement",
    "DivideByZero",
    "IntegerOverflow",
    "Unreachable",
    "CallStackExhausted",
    "FuelExhausted",
    "HostError",
};

uint64_t capacity_for(BoundsStrategy strategy, uint64_t length)
{
    if (strategy != BoundsStrategy::masked)
        return length;
    return std::bit_ceil(std::max<uint64_t>(length, page_size));
}
}  // namespace

std::string_view to_string(TrapKind kind) noexcept
{
    return trap_names[static_cast<size_t>(kind)];
}

std::optional<TrapKind> trap_kind_from_name(std::string_view name) noexcept
{
    for (size_t i = 0; i < trap_names.size(); ++i)
        if (trap_names[i] == name)
            return static_cast<TrapKind>(i);
    return std::nullopt;
}

std::string_view to_string(BoundsStrategy s) noexcept
{
    switch (s)
    {
    case BoundsStrategy::checked: return "checked";
    case BoundsStrategy::masked: return "masked";
    case BoundsStrategy::unchecked: return "unchecked";
    }
    return "?";
}

std::optional<BoundsStrategy> bounds_strategy_from_name(std::string_view name) noexcept
{
    if (name == "checked")
        return BoundsStrategy::checked;
    if (name == "masked")
        return BoundsStrategy::masked;
    if (name == "unchecked")
        return BoundsStrategy::unchecked;
    return std::nullopt;
}

LinearMemory::LinearMemory(uint32_t initial_pages, std::optional<uint32_t> max_pages, BoundsStrategy strategy,
                           size_t canary_bytes)
  : pages_{initial_pages}, max_pages_{max_pages}, strategy_{strategy}, canary_{canary_bytes}
{
    const uint32_t cap = std::min(max_pages_.value_or(gobi::max_pages), gobi::max_pages);
    if (initial_pages > cap)
        throw Error{"initial memory size exceeds maximum"};
    allocate(capacity_for(strategy_, size_bytes()), nullptr, 0);
}

namespace {
// The data base is page aligned so that every instance, whatever its
// strategy, sees the same cache and page offsets.
constexpr size_t storage_align = 4096;
}  // namespace

void LinearMemory::AlignedDelete::operator()(uint8_t* p) const noexcept
{
    ::operator delete[](p, std::align_val_t{storage_align});
}

void LinearMemory::allocate(uint64_t capacity, const uint8_t* old_data, uint64_t old_size)
{
    const size_t front = (canary_ + storage_align - 1) / storage_align * storage_align;
    const uint64_t total = front + capacity + canary_;
    std::unique_ptr<uint8_t[], AlignedDelete> fresh{
        static_cast<uint8_t*>(::operator new[](std::max<uint64_t>(total, 1), std::align_val_t{storage_align}))};
    uint8_t* body = fresh.get() + front;
    std::memset(body - canary_, canary_value, canary_);
    if (old_size != 0)
        std::memcpy(body, old_data, old_size);
    std::memset(body + old_size, 0, capacity - old_size);
    std::memset(body + capacity, canary_value, canary_);
    storage_ = std::move(fresh);
    front_ = front;
    capacity_ = capacity;
}

uint32_t LinearMemory::grow(uint32_t delta)
{
    const uint32_t old = pages_;
    const uint64_t cap = std::min(max_pages_.value_or(gobi::max_pages), gobi::max_pages);
    if (uint64_t{old} + delta > cap)
        return grow_failed;
    if (delta == 0)
        return old;

    const uint64_t new_size = (uint64_t{old} + delta) * page_size;
    const uint64_t new_cap = capacity_for(strategy_, new_size);
    try
    {
        if (new_cap > capacity_)
            allocate(new_cap, data(), capacity_);
        else
            std::memset(data() + size_bytes(), 0, new_size - size_bytes());
    }
    catch (const std::bad_alloc&)
    {
        return grow_failed;
    }
    pages_ = old + delta;
    return old;
}

void LinearMemory::read(uint32_t offset, std::span<uint8_t> out) const
{
    if (!in_bounds(offset, out.size()))
        throw OutOfBoundsError{"memory read out of bounds"};
    if (!out.empty())
        std::memcpy(out.data(), data() + offset, out.size());
}

void LinearMemory::write(uint32_t offset, std::span<const uint8_t> in)
{
    if (!in_bounds(offset, in.size()))
        throw OutOfBoundsError{"memory write out of bounds"};
    if (!in.empty())
        std::memcpy(data() + offset, in.data(), in.size());
}

bool LinearMemory::canaries_intact() const noexcept
{
    const uint8_t* front = data() - canary_;
    const uint8_t* back = data() + capacity_;
    auto ok = [](uint8_t b) { return b == canary_value; };
    return std::all_of(front, front + canary_, ok) && std::all_of(back, back + canary_, ok);
}

std::optional<uint64_t> effective_address(const LinearMemory& mem, uint32_t base, uint32_t static_offset,
                                          uint32_t width) noexcept
{
    switch (mem.strategy())
    {
    case BoundsStrategy::checked:
        return confine_address<BoundsStrategy::checked>(mem.size_bytes(), mem.capacity(), base, static_offset,
                                                        width);
    case BoundsStrategy::masked:
        return confine_address<BoundsStrategy::masked>(mem.size_bytes(), mem.capacity(), base, static_offset,
                                                       width);
    case BoundsStrategy::unchecked:
        return confine_address<BoundsStrategy::unchecked>(mem.size_bytes(), mem.capacity(), base,
                                                          static_offset, width);
    }
    return std::nullopt;
}

}  // namespace gobi
