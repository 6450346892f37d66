// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/errors.hpp"
#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gobi::abi {

class AbiError : public Error
{
public:
    using Error::Error;
};

enum class Scalar : uint8_t { i8, i16, i32, i64, f32, f64, ptr };
inline constexpr size_t scalar_count = 7;

std::string_view to_string(Scalar s) noexcept;
std::optional<Scalar> scalar_from_name(std::string_view name) noexcept;

struct MachineModel
{
    std::string name;
    std::array<uint32_t, scalar_count> size{};
    std::array<uint32_t, scalar_count> align{};

    uint32_t size_of(Scalar s) const noexcept { return size[static_cast<size_t>(s)]; }
    uint32_t align_of(Scalar s) const noexcept { return align[static_cast<size_t>(s)]; }

    /// LP64 host: 8-byte pointers.
    static MachineModel host64();
    /// Unmodified 32-bit sandbox target: 4-byte pointers.
    static MachineModel wasm32();
};

struct RecordDef;

struct FieldType
{
    enum class Kind : uint8_t { scalar, array, record };

    Kind kind = Kind::scalar;
    Scalar scalar = Scalar::i32;
    std::shared_ptr<const FieldType> element;  // array
    uint32_t count = 0;                        // array
    std::shared_ptr<const RecordDef> record;   // record

    static FieldType of(Scalar s);
    static FieldType array_of(FieldType element, uint32_t count);
    static FieldType record_of(std::shared_ptr<const RecordDef> record);

    /// An array whose innermost element is a pointer.
    bool is_pointer_array() const noexcept;
    std::string to_string() const;
};

struct Field
{
    std::string name;
    FieldType type;
};

struct RecordDef
{
    std::string name;
    std::vector<Field> fields;
};

struct Padding
{
    enum class Kind : uint8_t
    {
        alignment,     // gap before a field
        pointer_tail,  // the unused high half of an adapted pointer slot
        tail,          // end of record up to its alignment
    };
    uint64_t offset = 0;
    uint64_t length = 0;
    Kind kind = Kind::alignment;

    friend bool operator==(const Padding&, const Padding&) = default;
};

struct FieldLayout
{
    std::string name;
    uint64_t offset = 0;
    uint64_t size = 0;
    uint32_t align = 1;
};

struct LayoutResult
{
    std::vector<FieldLayout> fields;
    uint64_t size = 0;
    uint32_t align = 1;
    /// Every padding byte, nested records and array elements included.
    std::vector<Padding> padding;
    /// Bytes holding scalar values.
    uint64_t data_bytes = 0;

    uint64_t padding_bytes() const noexcept;
};

/// Plain C layout of `rec` under `model`.
LayoutResult layout(const RecordDef& rec, const MachineModel& model);

/// Sandbox layout with adapted pointers: each pointer keeps 4 data bytes in
/// an 8-aligned 8-byte slot; an n-element pointer array keeps 4n data bytes
/// followed by 4n bytes of padding. Other scalars use the host sizes.
LayoutResult layout_adapted(const RecordDef& rec, const MachineModel& host);

struct FieldDiff
{
    std::string name;
    uint64_t host_offset = 0;
    uint64_t sandbox_offset = 0;
};

struct CompatibilityReport
{
    bool compatible = false;
    uint64_t host_size = 0;
    uint64_t sandbox_size = 0;
    std::vector<FieldDiff> diffs;  // fields whose offsets differ
};

CompatibilityReport check_compatible(const RecordDef& rec, const MachineModel& host);

/// Parses record definitions:
///   (record Name (field a i32) (field b ptr) (field c (array ptr 4)) (field d (record Other)))
/// A `(record Other)` with no fields refers to another definition in the
/// same text; a record with fields may also be written inline. Unions and
/// bitfields are rejected. Throws AbiError with a "line:col: " prefix.
std::vector<std::shared_ptr<const RecordDef>> parse_records(std::string_view text);

enum class Direction { host_to_sandbox, sandbox_to_host };

/// Maps one element value; nullopt rejects it. For host_to_sandbox the
/// result must also fit in 32 bits.
using ValueMap = std::function<std::optional<uint64_t>(uint64_t)>;

struct ConvertResult
{
    bool ok = true;
    size_t failed_index = 0;

    explicit operator bool() const noexcept { return ok; }
};

/// Converts an array of `count` pointers between the host form (8-byte LE
/// values) and the sandbox form (4-byte LE values packed at the start, then
/// 4*count zero bytes). `buffer` must hold exactly 8*count bytes. On failure
/// the buffer is left unchanged.
ConvertResult convert_ptr_array_in_place(std::span<uint8_t> buffer, size_t count, Direction direction,
                                         const ValueMap& value_map);

/// Same with the truncate / zero-extend maps; values >= 2^32 fail.
ConvertResult convert_ptr_array_in_place(std::span<uint8_t> buffer, size_t count, Direction direction);

}  // namespace gobi::abi
