// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/binary.hpp"
#include "gobi/validate.hpp"
#include "test_utils.hpp"
#include <random>

using namespace gobi;
using namespace gobi::test;

namespace {
DecodeError decode_error(const std::vector<uint8_t>& bytes)
{
    try
    {
        decode_binary(bytes);
    }
    catch (const DecodeError& e)
    {
        return e;
    }
    ADD_FAILURE() << "no decode error for " << to_hex(bytes);
    return DecodeError{0, ""};
}

const char* const sample_module = R"((module
  (type $t (func (param i32) (result i32)))
  (import "env" "f" (func $imp (type $t)))
  (import "env" "k" (global $k i64))
  (memory (export "memory") 1 3)
  (table 4 funcref)
  (global $g (mut f64) (f64.const -0.5))
  (global $h i64 (global.get $k))
  (elem (i32.const 1) $imp $main)
  (func $main (export "main") (param i32) (result i32) (local i64 f32)
    block $out (result i32)
      i32.const 5
      local.get 0
      br_table $out $out 0
    end
    i32.const 8
    i32.load16_s offset=4 align=1
    i32.add
    call $imp
    i32.const 2
    call_indirect (type $t)
    f32.const 0x1p-3
    local.set 2)
  (start $s)
  (func $s)
  (data (i32.const 8) "\01\02\03\04\05\06")))";
}  // namespace

TEST(decode_binary, empty_module_header)
{
    // Header produced by a reference assembler for "(module)".
    const auto header = from_hex("0061736d01000000");
    EXPECT_EQ(decode_binary(header), ModuleIR{});
    EXPECT_EQ(encode_binary(ModuleIR{}), header);
    EXPECT_EQ(encode_binary(parse_wat("(module)")), header);
}

TEST(decode_binary, bad_magic)
{
    const DecodeError e = decode_error(from_hex("0161736d01000000"));
    EXPECT_EQ(e.message(), "bad magic");
    EXPECT_EQ(e.offset(), 0u);
    EXPECT_EQ(decode_error(from_hex("0061")).message(), "bad magic");
}

TEST(decode_binary, bad_version)
{
    EXPECT_EQ(decode_error(from_hex("0061736d02000000")).message(), "bad version");
}

TEST(decode_binary, truncated_section)
{
    // Code section declaring 16 bytes with only 2 present.
    EXPECT_EQ(decode_error(from_hex("0061736d010000000a100100")).message(), "truncated section");
}

TEST(decode_binary, section_out_of_order)
{
    // Function section (3) after code section (10).
    EXPECT_EQ(decode_error(from_hex("0061736d010000000a0100030100")).message(), "section out of order");
}

TEST(decode_binary, type_index_out_of_range)
{
    // One function referencing type 5 with no type section.
    EXPECT_EQ(decode_error(from_hex("0061736d0100000003020105")).message(), "type index out of range");
}

TEST(decode_binary, padded_leb_accepted)
{
    // Type section whose size and count use padded LEB128 encodings.
    const auto padded = from_hex("0061736d01000000" "0187808080008180800060" "0000");
    const ModuleIR m = decode_binary(padded);
    ASSERT_EQ(m.types.size(), 1u);
    EXPECT_EQ(m.types[0], FuncType{});
    // The encoder emits canonical encodings.
    EXPECT_EQ(encode_binary(m), from_hex("0061736d01000000010401600000"));
}

TEST(decode_binary, custom_sections_preserved)
{
    ModuleIR m = parse_wat("(module (memory 1) (func))");
    m.customs.push_back({"first", {1, 2, 3}, 0});
    m.customs.push_back({"after_memory", {9}, 5});
    const auto bytes = encode_binary(m);
    EXPECT_EQ(decode_binary(bytes), m);
}

TEST(round_trip, add_module)
{
    const ModuleIR m = parse_wat(
        R"((module (func (export "add") (param i32 i32) (result i32) local.get 0 local.get 1 i32.add)))");
    const auto bytes = encode_binary(m);
    EXPECT_EQ(decode_binary(bytes), m);
    EXPECT_EQ(encode_binary(decode_binary(bytes)), bytes);
}

TEST(round_trip, sample_module)
{
    const ModuleIR m = parse_wat(sample_module);
    ASSERT_TRUE(validate(m).ok) << validate(m).to_string();
    const auto bytes = encode_binary(m);
    EXPECT_EQ(decode_binary(bytes), m);
    EXPECT_EQ(encode_binary(decode_binary(bytes)), bytes);
}

// Mutated binaries decode or fail with DecodeError; nothing else escapes.
TEST(decode_binary, fuzz_mutations)
{
    const auto base = encode_binary(parse_wat(sample_module));
    std::mt19937_64 rng{99};
    int decoded = 0;
    for (int i = 0; i < 10000; ++i)
    {
        auto bytes = base;
        const int edits = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < edits; ++k)
        {
            const size_t pos = rng() % bytes.size();
            switch (rng() % 3)
            {
            case 0: bytes[pos] = static_cast<uint8_t>(rng()); break;
            case 1: bytes.erase(bytes.begin() + static_cast<std::ptrdiff_t>(pos)); break;
            default: bytes.insert(bytes.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<uint8_t>(rng())); break;
            }
            if (bytes.empty())
                bytes.push_back(0);
        }
        try
        {
            const ModuleIR m = decode_binary(bytes);
            validate(m);
            ++decoded;
        }
        catch (const DecodeError& e)
        {
            EXPECT_LE(e.offset(), bytes.size());
        }
    }
    EXPECT_GT(decoded, 0);
}
