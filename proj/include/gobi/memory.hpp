// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/errors.hpp"
#include "gobi/module.hpp"
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

namespace gobi {

/// How a sandboxed address is confined to linear memory.
enum class BoundsStrategy : uint8_t
{
    checked,    // compare against the memory length and trap
    masked,     // AND with (capacity - 1); capacity is a power of two
    unchecked,  // no guard at all; benchmarking only
};

std::string_view to_string(BoundsStrategy s) noexcept;
std::optional<BoundsStrategy> bounds_strategy_from_name(std::string_view name) noexcept;

inline constexpr uint32_t grow_failed = 0xffffffffu;

/// The single isolated memory region of an instance.
///
/// Backing storage is `capacity()` bytes. For checked and unchecked memories
/// that equals `size_bytes()`; masked memories round it up to a power of two
/// and the tail beyond `size_bytes()` stays owned by the sandbox. Optional
/// canary bytes surround the storage so tests can detect writes that escape it.
class LinearMemory
{
public:
    static constexpr uint8_t canary_value = 0xa5;

    LinearMemory(uint32_t initial_pages, std::optional<uint32_t> max_pages, BoundsStrategy strategy,
                 size_t canary_bytes = 0);

    LinearMemory(const LinearMemory&) = delete;
    LinearMemory& operator=(const LinearMemory&) = delete;
    LinearMemory(LinearMemory&&) noexcept = default;
    LinearMemory& operator=(LinearMemory&&) noexcept = default;

    uint32_t size_pages() const noexcept { return pages_; }
    uint64_t size_bytes() const noexcept { return uint64_t{pages_} * page_size; }
    uint64_t capacity() const noexcept { return capacity_; }
    std::optional<uint32_t> max_pages() const noexcept { return max_pages_; }
    BoundsStrategy strategy() const noexcept { return strategy_; }

    uint8_t* data() noexcept { return storage_.get() + front_; }
    const uint8_t* data() const noexcept { return storage_.get() + front_; }
    std::span<uint8_t> bytes() noexcept { return {data(), static_cast<size_t>(size_bytes())}; }
    std::span<const uint8_t> bytes() const noexcept { return {data(), static_cast<size_t>(size_bytes())}; }

    /// Grows by `delta` zeroed pages. Returns the previous page count, or
    /// `grow_failed` leaving the memory unchanged. May move the storage.
    uint32_t grow(uint32_t delta);

    /// True iff [offset, offset + length) lies within size_bytes().
    bool in_bounds(uint64_t offset, uint64_t length) const noexcept
    {
        return offset <= size_bytes() && length <= size_bytes() - offset;
    }

    /// Host-side copies. All-or-nothing: throw OutOfBoundsError without
    /// touching memory or the buffer when the range is not fully in bounds.
    void read(uint32_t offset, std::span<uint8_t> out) const;
    void write(uint32_t offset, std::span<const uint8_t> in);

    /// True if every canary byte still holds `canary_value`.
    bool canaries_intact() const noexcept;
    size_t canary_bytes() const noexcept { return canary_; }

private:
    void allocate(uint64_t capacity, const uint8_t* old_data, uint64_t old_size);

    struct AlignedDelete
    {
        void operator()(uint8_t* p) const noexcept;
    };

    std::unique_ptr<uint8_t[], AlignedDelete> storage_;
    size_t front_ = 0;  // data() offset: page aligned, preceded by the front canary
    uint32_t pages_ = 0;
    std::optional<uint32_t> max_pages_;
    uint64_t capacity_ = 0;
    BoundsStrategy strategy_;
    size_t canary_ = 0;
};

/// In-place form of confine_address: rewrites `ea` (base + static offset)
/// to the offset actually accessed and returns false for a trap.
template <BoundsStrategy S>
[[gnu::always_inline]] inline bool confine(uint64_t length, uint64_t capacity, uint64_t& ea, uint32_t width) noexcept
{
    if constexpr (S == BoundsStrategy::checked)
        return ea + width <= length;
    else if constexpr (S == BoundsStrategy::masked)
    {
        ea &= capacity - 1;
        return ea + width <= capacity;
    }
    else
    {
        (void)length;
        (void)capacity;
        (void)width;
        return true;
    }
}

/// Address computation for one access; arithmetic is done in 64 bits so
/// base + offset cannot wrap. Returns nullopt where the access must trap.
template <BoundsStrategy S>
inline std::optional<uint64_t> confine_address(uint64_t length, uint64_t capacity, uint32_t base,
                                               uint32_t static_offset, uint32_t width) noexcept
{
    uint64_t ea = uint64_t{base} + static_offset;
    if (!confine<S>(length, capacity, ea, width))
        return std::nullopt;
    return ea;
}

/// Validated offset of an access of `width` bytes (1, 2, 4 or 8) under the
/// memory's strategy, or nullopt for an OutOfBoundsMemory trap.
std::optional<uint64_t> effective_address(const LinearMemory& mem, uint32_t base, uint32_t static_offset,
                                          uint32_t width) noexcept;

}  // namespace gobi
