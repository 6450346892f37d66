// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace gobi {

/// First-fit allocator over a region of linear memory.
///
/// All bookkeeping lives on the host; nothing is stored inside the managed
/// region, so sandboxed code cannot corrupt it. Sizes are rounded up to a
/// multiple of 8 and every block start is at least 8-aligned.
class HeapAllocator
{
public:
    enum class FreeStatus
    {
        ok,
        invalid,      // not the start of a live allocation
        double_free,  // start of an allocation that was already freed
    };

    static constexpr uint32_t granule = 8;
    static constexpr uint32_t max_align = 64;

    HeapAllocator() = default;
    /// Manages [base, end). `base` is rounded up to the granule.
    HeapAllocator(uint64_t base, uint64_t end);

    /// Offset of a fresh block of at least `size` bytes aligned to `align`
    /// (a power of two, at most max_align), or nullopt when nothing fits.
    std::optional<uint32_t> allocate(uint32_t size, uint32_t align);
    FreeStatus free(uint32_t offset);

    /// Moves the region end outward (memory grew).
    void extend(uint64_t new_end);

    uint64_t base() const noexcept { return base_; }
    uint64_t end() const noexcept { return end_; }
    /// Size of the free block touching end(), 0 if the tail is allocated.
    uint64_t tail_free() const noexcept;
    uint64_t free_bytes() const noexcept;

    /// Rounded size of the live allocation starting at `offset`.
    std::optional<uint64_t> allocation_size(uint32_t offset) const;
    size_t live_count() const noexcept { return live_.size(); }

    /// (start, length) pairs in address order.
    std::vector<std::pair<uint64_t, uint64_t>> free_blocks() const;
    std::vector<std::pair<uint64_t, uint64_t>> live_blocks() const;

private:
    void release(uint64_t start, uint64_t length);

    uint64_t base_ = 0;
    uint64_t end_ = 0;
    std::map<uint64_t, uint64_t> free_;  // start -> length
    std::map<uint64_t, uint64_t> live_;  // start -> length
    std::set<uint64_t> freed_;           // starts freed and not reused since
};

}  // namespace gobi
