// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/validate.hpp"
#include "gobi/wat.hpp"
#include <gtest/gtest.h>
#include <random>

using namespace gobi;

namespace {
ParseError parse_error(std::string_view text)
{
    try
    {
        parse_wat(text);
    }
    catch (const ParseError& e)
    {
        return e;
    }
    ADD_FAILURE() << "no parse error for: " << text;
    return ParseError{ParseError::Kind::syntax, 0, 0, ""};
}
}  // namespace

TEST(parse_wat, empty_module)
{
    const ModuleIR m = parse_wat("(module)");
    EXPECT_EQ(m, ModuleIR{});
    EXPECT_EQ(parse_wat("  ;; nothing\n(module (; block ;))"), ModuleIR{});
}

TEST(parse_wat, add)
{
    const ModuleIR m = parse_wat(
        R"((module (func (export "add") (param i32 i32) (result i32) local.get 0 local.get 1 i32.add)))");
    ASSERT_EQ(m.types.size(), 1u);
    EXPECT_EQ(m.types[0], (FuncType{{ValKind::I32, ValKind::I32}, {ValKind::I32}}));
    ASSERT_EQ(m.functions.size(), 1u);
    EXPECT_EQ(m.functions[0].body.size(), 4u);  // three instructions plus end
    ASSERT_EQ(m.exports.size(), 1u);
    EXPECT_EQ(m.exports[0].name, "add");
    EXPECT_EQ(m.exports[0].kind, ExternKind::func);
    EXPECT_TRUE(validate(m).ok);
}

TEST(parse_wat, unclosed_list_position)
{
    const ParseError e = parse_error("(module (func");
    EXPECT_EQ(e.kind(), ParseError::Kind::syntax);
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.column(), 9u);
    EXPECT_EQ(std::string{e.what()}, "1:9: unclosed list");
}

TEST(parse_wat, unknown_identifier)
{
    const ParseError e = parse_error("(module (func call $nowhere))");
    EXPECT_EQ(e.kind(), ParseError::Kind::unknown_identifier);
    EXPECT_EQ(parse_error("(module (func block br $x end))").kind(), ParseError::Kind::unknown_identifier);
}

TEST(parse_wat, unsupported_constructs)
{
    for (const char* text : {
             "(module (func (result i32) (i32.add (i32.const 1) (i32.const 2))))",
             "(module (func (result i32 i32) i32.const 1 i32.const 2))",
             "(module (func v128.const i32x4 0 0 0 0 drop))",
             "(module (memory 1) (func i32.const 0 i32.const 0 i32.const 0 memory.fill))",
             "(module (func (result f32) f32.const nan:0x200000))",
             "(module (table 1 externref))",
             "(module (memory (data \"x\")))",
         })
    {
        EXPECT_EQ(parse_error(text).kind(), ParseError::Kind::unsupported) << text;
    }
}

TEST(parse_wat, symbolic_and_inline_forms)
{
    const ModuleIR m = parse_wat(R"((module
      (type $t (func (param i32) (result i32)))
      (import "env" "f" (func $imp (type $t)))
      (memory $mem (export "memory") 1 2)
      (global $g (export "g") (mut i32) (i32.const -1))
      (table 2 funcref)
      (elem (i32.const 0) $imp $local)
      (func $local (type $t) local.get 0 call $imp)
      (export "local" (func $local))
      (data (i32.const 16) "a\00\ff\u{48}")))");
    ASSERT_EQ(m.imports.size(), 1u);
    EXPECT_EQ(m.imports[0].module, "env");
    EXPECT_EQ(m.functions.at(0).type_index, 0u);
    // call $imp resolves to function index 0 (imports come first).
    EXPECT_EQ(m.functions[0].body.at(1).op, Opcode::call);
    EXPECT_EQ(m.functions[0].body.at(1).index, 0u);
    EXPECT_EQ(m.memory->limits.max, 2u);
    EXPECT_EQ(m.globals.at(0).init.instr.value, 0xffffffffu);
    EXPECT_EQ(m.elements.at(0).functions, (std::vector<uint32_t>{0, 1}));
    EXPECT_EQ(m.data.at(0).bytes, (std::vector<uint8_t>{'a', 0, 0xff, 'H'}));
    ASSERT_NE(m.find_export("local"), nullptr);
    EXPECT_EQ(m.find_export("local")->index, 1u);
    EXPECT_EQ(m.find_export("memory")->kind, ExternKind::memory);
    EXPECT_TRUE(validate(m).ok) << validate(m).to_string();
}

TEST(parse_wat, memarg)
{
    const ModuleIR m = parse_wat("(module (memory 1) (func (result i64) i32.const 0 i64.load32_u offset=12 align=2))");
    const Instr& load = m.functions[0].body.at(1);
    EXPECT_EQ(load.op, Opcode::i64_load32_u);
    EXPECT_EQ(load.offset, 12u);
    EXPECT_EQ(load.align, 1u);
    const ModuleIR d = parse_wat("(module (memory 1) (func (result i64) i32.const 0 i64.load))");
    EXPECT_EQ(d.functions[0].body.at(1).align, 3u);
}

TEST(literals, integers)
{
    EXPECT_EQ(parse_i32_literal("42"), 42u);
    EXPECT_EQ(parse_i32_literal("-1"), 0xffffffffu);
    EXPECT_EQ(parse_i32_literal("0xffff_ffff"), 0xffffffffu);
    EXPECT_EQ(parse_i32_literal("-2147483648"), 0x80000000u);
    EXPECT_EQ(parse_i32_literal("4294967296"), std::nullopt);
    EXPECT_EQ(parse_i32_literal("-2147483649"), std::nullopt);
    EXPECT_EQ(parse_i32_literal("1__0"), std::nullopt);
    EXPECT_EQ(parse_i64_literal("-9223372036854775808"), 0x8000000000000000u);
    EXPECT_EQ(parse_i64_literal("18446744073709551615"), 0xffffffffffffffffu);
    EXPECT_EQ(parse_i64_literal("18446744073709551616"), std::nullopt);
}

TEST(literals, floats)
{
    EXPECT_EQ(parse_f32_literal("1.5"), 0x3fc00000u);
    EXPECT_EQ(parse_f32_literal("-0"), 0x80000000u);
    EXPECT_EQ(parse_f32_literal("0x1p-1"), 0x3f000000u);
    EXPECT_EQ(parse_f32_literal("inf"), 0x7f800000u);
    EXPECT_EQ(parse_f32_literal("-nan"), 0xffc00000u);
    EXPECT_EQ(parse_f32_literal("nan"), canonical_nan32);
    EXPECT_EQ(parse_f64_literal("nan"), canonical_nan64);
    EXPECT_EQ(parse_f64_literal("1e3"), 0x408f400000000000u);
    EXPECT_EQ(parse_f64_literal("0x1.8p1"), 0x4008000000000000u);
    EXPECT_EQ(parse_f64_literal("1_000.5"), 0x408f440000000000u);
    EXPECT_EQ(parse_f64_literal("abc"), std::nullopt);
}

// Totality: any input yields a module or a positioned ParseError.
TEST(parse_wat, fuzz_random_inputs)
{
    static constexpr std::string_view fragments[] = {
        "(", ")", "module", "func", "param", "result", "i32", "i64", "f32", "f64", "local.get", "0", "1",
        "$x", "i32.add", "block", "loop", "end", "br", "br_if", "\"s\"", "export", "memory", "data",
        "table", "funcref", "elem", "global", "mut", "i32.const", "-7", "0x10", "nan", ";;c\n", "(;", ";)",
        "call_indirect", "type", "if", "else", "offset=4", "align=8", "import", " ", "\n", "\\", "\"",
    };
    std::mt19937_64 rng{20260901};
    int modules = 0;
    for (int i = 0; i < 10000; ++i)
    {
        std::string text;
        const int len = static_cast<int>(rng() % 64);
        if (i % 2 == 0)
        {
            for (int k = 0; k < len; ++k)
                text += static_cast<char>(rng() % 256);
        }
        else
        {
            text = "(module ";
            for (int k = 0; k < len; ++k)
            {
                text += fragments[rng() % std::size(fragments)];
                text += ' ';
            }
            if (rng() % 2)
                text += ")";
        }
        try
        {
            const ModuleIR m = parse_wat(text);
            validate(m);
            ++modules;
        }
        catch (const ParseError& e)
        {
            EXPECT_GE(e.line(), 1u);
            EXPECT_GE(e.column(), 1u);
        }
    }
    EXPECT_GT(modules, 0);
}

TEST(parse_wat, deep_nesting_is_an_error_not_a_crash)
{
    const std::string deep(100000, '(');
    EXPECT_THROW(parse_wat(deep), ParseError);
}
