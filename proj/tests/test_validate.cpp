// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/validate.hpp"
#include "gobi/wat.hpp"
#include <gtest/gtest.h>

using namespace gobi;

namespace {
ValidationReport check(std::string_view text)
{
    return validate(parse_wat(text));
}

FuncDef body(std::vector<Instr> instrs, uint32_t type_index = 0)
{
    instrs.push_back(make_instr(Opcode::end));
    return FuncDef{type_index, {}, std::move(instrs)};
}
}  // namespace

TEST(validate, add_ok)
{
    const auto r = check(
        R"((module (func (export "add") (param i32 i32) (result i32) local.get 0 local.get 1 i32.add)))");
    EXPECT_TRUE(r.ok);
    EXPECT_TRUE(r.diagnostics.empty());
}

TEST(validate, stack_underflow)
{
    const auto r = check("(module (func i32.add))");
    EXPECT_FALSE(r.ok);
    EXPECT_TRUE(r.mentions("stack underflow")) << r.to_string();
    EXPECT_EQ(r.diagnostics.at(0).location, "func[0] instr 0");
}

TEST(validate, call_indirect_type_out_of_range)
{
    ModuleIR m = parse_wat("(module (type (func)) (table 1 funcref) (func))");
    m.functions[0].body = body({make_instr(Opcode::i32_const), make_instr(Opcode::call_indirect, 7)}).body;
    const auto r = validate(m);
    EXPECT_FALSE(r.ok);
    EXPECT_TRUE(r.mentions("type index out of range")) << r.to_string();
}

TEST(validate, type_mismatch)
{
    EXPECT_TRUE(check("(module (func (result i32) i64.const 1))").mentions("type mismatch"));
    EXPECT_TRUE(check("(module (func i32.const 1))").mentions("type mismatch"));
    EXPECT_TRUE(check("(module (func (result i32) i32.const 1 if (result i32) i32.const 2 end))")
                    .mentions("if without else"));
}

TEST(validate, unreachable_is_polymorphic)
{
    EXPECT_TRUE(check("(module (func (result i32) unreachable i32.add))").ok);
    EXPECT_TRUE(check("(module (func (result i64) block br 0 end unreachable))").ok);
    EXPECT_FALSE(check("(module (func (result i32) unreachable i64.const 0 i32.add))").ok);
}

TEST(validate, memory_and_globals)
{
    EXPECT_TRUE(check("(module (func (result i32) i32.const 0 i32.load))").mentions("no memory"));
    EXPECT_TRUE(check("(module (memory 1) (func i32.const 0 i32.load align=8 drop))")
                    .mentions("alignment must not be larger than natural"));
    EXPECT_TRUE(check("(module (global i32 (i32.const 0)) (func i32.const 1 global.set 0))")
                    .mentions("global is immutable"));
    EXPECT_TRUE(check("(module (memory 65537))").mentions("memory minimum size exceeds"));
}

TEST(validate, module_level_rules)
{
    EXPECT_TRUE(check(R"((module (func (export "a")) (func (export "a"))))").mentions("duplicate export name"));
    EXPECT_TRUE(check("(module (func $s (param i32)) (start $s))").mentions("start function must have type"));
    EXPECT_TRUE(check("(module (global $a i32 (i32.const 1)) (global i32 (global.get $a)))")
                    .mentions("constant expression may only read imported globals"));
}

// Every index space reports out-of-range references by name.
TEST(validate, rejection_names_index_space)
{
    const ModuleIR base = parse_wat("(module (type (func)) (table 1 funcref) (memory 1) (global i32 (i32.const 0)) (func))");
    ASSERT_TRUE(validate(base).ok);

    struct Case
    {
        const char* space;
        std::function<void(ModuleIR&)> mutate;
    };
    const std::vector<Case> cases = {
        {"function index", [](ModuleIR& m) { m.functions[0].body = body({make_instr(Opcode::call, 9)}).body; }},
        {"function index", [](ModuleIR& m) { m.exports.push_back({"x", ExternKind::func, 9}); }},
        {"function index", [](ModuleIR& m) { m.elements.push_back({0, {make_instr(Opcode::i32_const)}, {9}}); }},
        {"function index", [](ModuleIR& m) { m.start = 9; }},
        {"type index", [](ModuleIR& m) { m.functions[0].type_index = 9; }},
        {"global index", [](ModuleIR& m) { m.functions[0].body = body({make_instr(Opcode::global_get, 9), make_instr(Opcode::drop)}).body; }},
        {"global index", [](ModuleIR& m) { m.exports.push_back({"x", ExternKind::global, 9}); }},
        {"local index", [](ModuleIR& m) { m.functions[0].body = body({make_instr(Opcode::local_get, 9), make_instr(Opcode::drop)}).body; }},
        {"label index", [](ModuleIR& m) { m.functions[0].body = body({make_instr(Opcode::br, 9)}).body; }},
        {"table index", [](ModuleIR& m) { m.exports.push_back({"x", ExternKind::table, 1}); }},
        {"table index", [](ModuleIR& m) { m.elements.push_back({3, {make_instr(Opcode::i32_const)}, {0}}); }},
        {"memory index", [](ModuleIR& m) { m.exports.push_back({"x", ExternKind::memory, 1}); }},
        {"memory index", [](ModuleIR& m) { m.data.push_back({2, {make_instr(Opcode::i32_const)}, {1}}); }},
    };
    for (const Case& c : cases)
    {
        ModuleIR m = base;
        c.mutate(m);
        const auto r = validate(m);
        EXPECT_FALSE(r.ok) << c.space;
        EXPECT_TRUE(r.mentions(std::string{c.space} + " out of range")) << c.space << ": " << r.to_string();
    }
}
