// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/validate.hpp"
#include "numeric_sig.hpp"
#include <set>
#include <stdexcept>

namespace gobi {

namespace {

/// Operand type during checking; `unknown` appears only in unreachable code.
enum class Slot : uint8_t
{
    i32,
    i64,
    f32,
    f64,
    unknown,
};

Slot slot_of(ValKind k)
{
    switch (k)
    {
    case ValKind::I32:
        return Slot::i32;
    case ValKind::I64:
        return Slot::i64;
    case ValKind::F32:
        return Slot::f32;
    case ValKind::F64:
        return Slot::f64;
    }
    return Slot::unknown;
}

std::string_view slot_name(Slot s)
{
    switch (s)
    {
    case Slot::i32:
        return "i32";
    case Slot::i64:
        return "i64";
    case Slot::f32:
        return "f32";
    case Slot::f64:
        return "f64";
    case Slot::unknown:
        return "unknown";
    }
    return "?";
}

struct CheckFailure
{
    std::string message;
};

[[noreturn]] void reject(std::string message)
{
    throw CheckFailure{std::move(message)};
}

class FunctionChecker
{
public:
    FunctionChecker(const ModuleIR& m, const FuncType& type, const FuncDef& f) : m_{m}, type_{type}, f_{f}
    {
        locals_.insert(locals_.end(), type.params.begin(), type.params.end());
        locals_.insert(locals_.end(), f.locals.begin(), f.locals.end());
        functions_ = m.function_count();
        globals_ = m.global_count();
        has_memory_ = m.has_memory();
        has_table_ = m.has_table();
    }

    /// Index of the failing instruction is reported through `at`.
    void run(size_t& at)
    {
        push_ctrl(Opcode::block, type_.results.empty() ? std::nullopt : std::optional{type_.results[0]});
        for (at = 0; at < f_.body.size(); ++at)
        {
            if (ctrls_.empty())
                reject("instructions after the end of the function");
            step(f_.body[at]);
        }
        if (!ctrls_.empty())
            reject("function body must end with end");
    }

private:
    struct Ctrl
    {
        Opcode op;
        std::optional<ValKind> result;
        size_t height;
        bool unreachable;
    };

    void push(Slot s) { stack_.push_back(s); }
    void push(ValKind k) { stack_.push_back(slot_of(k)); }

    Slot pop()
    {
        const auto& c = ctrls_.back();
        if (stack_.size() == c.height)
        {
            if (c.unreachable)
                return Slot::unknown;
            reject("stack underflow");
        }
        const Slot s = stack_.back();
        stack_.pop_back();
        return s;
    }

    Slot pop(Slot expected)
    {
        const Slot actual = pop();
        if (actual != expected && actual != Slot::unknown && expected != Slot::unknown)
            reject("type mismatch: expected " + std::string{slot_name(expected)} + ", got " +
                   std::string{slot_name(actual)});
        return actual == Slot::unknown ? expected : actual;
    }

    Slot pop(ValKind k) { return pop(slot_of(k)); }

    void push_ctrl(Opcode op, std::optional<ValKind> result)
    {
        ctrls_.push_back({op, result, stack_.size(), false});
    }

    Ctrl pop_ctrl()
    {
        if (ctrls_.empty())
            reject("control stack underflow");
        const Ctrl c = ctrls_.back();
        if (c.result)
            pop(*c.result);
        if (stack_.size() != c.height)
            reject("type mismatch: values remaining on stack at end of block");
        ctrls_.pop_back();
        return c;
    }

    void set_unreachable()
    {
        auto& c = ctrls_.back();
        stack_.resize(c.height);
        c.unreachable = true;
    }

    const Ctrl& label(uint32_t depth)
    {
        if (depth >= ctrls_.size())
            reject("label index out of range");
        return ctrls_[ctrls_.size() - 1 - depth];
    }

    static std::optional<ValKind> label_type(const Ctrl& c)
    {
        return c.op == Opcode::loop ? std::nullopt : c.result;
    }

    void require_memory(const Instr& in)
    {
        if (!has_memory_)
            reject("memory index out of range: module has no memory");
        const auto& info = opcode_info(in.op);
        if (info.imm == ImmKind::memarg && in.align > info.natural_align_log2)
            reject("alignment must not be larger than natural");
    }

    ValKind local_type(uint32_t index)
    {
        if (index >= locals_.size())
            reject("local index out of range");
        return locals_[index];
    }

    void step(const Instr& in)
    {
        using enum Opcode;
        switch (in.op)
        {
        case unreachable:
            set_unreachable();
            break;
        case nop:
            break;
        case block:
        case loop:
            push_ctrl(in.op, in.block.result);
            break;
        case if_:
            pop(Slot::i32);
            push_ctrl(in.op, in.block.result);
            break;
        case else_:
        {
            if (ctrls_.empty() || ctrls_.back().op != if_)
                reject("else without matching if");
            const Ctrl c = pop_ctrl();
            push_ctrl(else_, c.result);
            break;
        }
        case end:
        {
            const Ctrl c = pop_ctrl();
            if (c.op == if_ && c.result)
                reject("type mismatch: if without else must not produce a value");
            if (c.result)
                push(*c.result);
            break;
        }
        case br:
        {
            const auto t = label_type(label(in.index));
            if (t)
                pop(*t);
            set_unreachable();
            break;
        }
        case br_if:
        {
            pop(Slot::i32);
            const auto t = label_type(label(in.index));
            if (t)
            {
                pop(*t);
                push(*t);
            }
            break;
        }
        case br_table:
        {
            pop(Slot::i32);
            const auto t = label_type(label(in.index));
            for (const auto target : in.targets)
                if (label_type(label(target)) != t)
                    reject("type mismatch: br_table targets have different arity or types");
            if (t)
                pop(*t);
            set_unreachable();
            break;
        }
        case return_:
            if (!type_.results.empty())
                pop(type_.results[0]);
            set_unreachable();
            break;
        case call:
        {
            if (in.index >= functions_)
                reject("function index out of range");
            apply(m_.function_type(in.index));
            break;
        }
        case call_indirect:
        {
            if (!has_table_)
                reject("table index out of range: module has no table");
            if (in.index >= m_.types.size())
                reject("type index out of range");
            pop(Slot::i32);
            apply(m_.types[in.index]);
            break;
        }
        case drop:
            pop();
            break;
        case select:
        {
            pop(Slot::i32);
            const Slot a = pop();
            const Slot b = pop(a);
            push(a == Slot::unknown ? b : a);
            break;
        }
        case local_get:
            push(local_type(in.index));
            break;
        case local_set:
            pop(local_type(in.index));
            break;
        case local_tee:
        {
            const ValKind k = local_type(in.index);
            pop(k);
            push(k);
            break;
        }
        case global_get:
            if (in.index >= globals_)
                reject("global index out of range");
            push(m_.global_type(in.index).kind);
            break;
        case global_set:
        {
            if (in.index >= globals_)
                reject("global index out of range");
            const auto g = m_.global_type(in.index);
            if (!g.mutable_)
                reject("global is immutable");
            pop(g.kind);
            break;
        }
        case memory_size:
            require_memory(in);
            push(Slot::i32);
            break;
        case memory_grow:
            require_memory(in);
            pop(Slot::i32);
            push(Slot::i32);
            break;
        case i32_const:
            push(Slot::i32);
            break;
        case i64_const:
            push(Slot::i64);
            break;
        case f32_const:
            push(Slot::f32);
            break;
        case f64_const:
            push(Slot::f64);
            break;
        default:
        {
            const auto b = static_cast<uint8_t>(in.op);
            if (opcode_info(in.op).imm == ImmKind::memarg)
            {
                require_memory(in);
                const auto sig = memory_sig(in.op);
                if (sig.is_store)
                {
                    pop(sig.kind);
                    pop(Slot::i32);
                }
                else
                {
                    pop(Slot::i32);
                    push(sig.kind);
                }
                break;
            }
            const auto sig = numeric_sig(b);
            if (!sig)
                reject("unsupported opcode");
            for (size_t i = sig->arity; i-- > 0;)
                pop(sig->params[i]);
            push(sig->result);
            break;
        }
        }
    }

    void apply(const FuncType& t)
    {
        for (size_t i = t.params.size(); i-- > 0;)
            pop(t.params[i]);
        for (const auto r : t.results)
            push(r);
    }

    const ModuleIR& m_;
    const FuncType& type_;
    const FuncDef& f_;
    std::vector<ValKind> locals_;
    std::vector<Slot> stack_;
    std::vector<Ctrl> ctrls_;
    uint32_t functions_ = 0;
    uint32_t globals_ = 0;
    bool has_memory_ = false;
    bool has_table_ = false;
};

class ModuleChecker
{
public:
    explicit ModuleChecker(const ModuleIR& m) : m_{m} {}

    ValidationReport run()
    {
        check_types();
        check_imports();
        check_table_and_memory();
        check_globals();
        check_function_signatures();
        check_exports();
        check_start();
        check_elements();
        check_data();
        check_bodies();
        report_.ok = true;
        for (const auto& d : report_.diagnostics)
            if (d.severity == Diagnostic::Severity::error)
                report_.ok = false;
        return std::move(report_);
    }

private:
    void error(std::string location, std::string message)
    {
        report_.diagnostics.push_back({Diagnostic::Severity::error, std::move(location), std::move(message)});
    }

    static std::string at(std::string_view what, size_t i)
    {
        return std::string{what} + "[" + std::to_string(i) + "]";
    }

    void check_types()
    {
        for (size_t i = 0; i < m_.types.size(); ++i)
            if (m_.types[i].results.size() > 1)
                error(at("type", i), "multiple results are not supported");
    }

    void check_limits(const std::string& where, const Limits& l, uint32_t cap, std::string_view what)
    {
        if (l.min > cap)
            error(where, std::string{what} + " minimum size exceeds " + std::to_string(cap));
        if (l.max && *l.max > cap)
            error(where, std::string{what} + " maximum size exceeds " + std::to_string(cap));
        if (l.max && *l.max < l.min)
            error(where, std::string{what} + " size minimum must not be greater than maximum");
    }

    void check_imports()
    {
        for (size_t i = 0; i < m_.imports.size(); ++i)
        {
            const auto& imp = m_.imports[i];
            switch (imp.kind)
            {
            case ExternKind::func:
                if (imp.type_index >= m_.types.size())
                    error(at("import", i), "type index out of range");
                break;
            case ExternKind::table:
                check_limits(at("import", i), imp.table.limits, 0xffffffffu, "table");
                break;
            case ExternKind::memory:
                check_limits(at("import", i), imp.memory.limits, max_pages, "memory");
                break;
            case ExternKind::global:
                if (imp.global.mutable_)
                    error(at("import", i), "mutable global imports are not supported");
                break;
            }
        }
    }

    void check_table_and_memory()
    {
        size_t tables = m_.table ? 1 : 0;
        size_t memories = m_.memory ? 1 : 0;
        for (const auto& imp : m_.imports)
        {
            tables += imp.kind == ExternKind::table;
            memories += imp.kind == ExternKind::memory;
        }
        if (tables > 1)
            error("module", "multiple tables are not allowed");
        if (memories > 1)
            error("module", "multiple memories are not allowed");
        if (m_.table)
            check_limits("table[0]", m_.table->limits, 0xffffffffu, "table");
        if (m_.memory)
            check_limits("memory[0]", m_.memory->limits, max_pages, "memory");
    }

    /// Checks a constant expression and returns its kind, or nullopt on error.
    std::optional<ValKind> check_const(const std::string& where, const ConstExpr& e)
    {
        switch (e.instr.op)
        {
        case Opcode::i32_const:
            return ValKind::I32;
        case Opcode::i64_const:
            return ValKind::I64;
        case Opcode::f32_const:
            return ValKind::F32;
        case Opcode::f64_const:
            return ValKind::F64;
        case Opcode::global_get:
        {
            const uint32_t imported = m_.imported_global_count();
            if (e.instr.index >= m_.global_count())
            {
                error(where, "global index out of range");
                return std::nullopt;
            }
            if (e.instr.index >= imported)
            {
                error(where, "constant expression may only read imported globals");
                return std::nullopt;
            }
            const auto g = m_.global_type(e.instr.index);
            if (g.mutable_)
            {
                error(where, "constant expression may not read a mutable global");
                return std::nullopt;
            }
            return g.kind;
        }
        default:
            error(where, "constant expression required");
            return std::nullopt;
        }
    }

    void check_globals()
    {
        for (size_t i = 0; i < m_.globals.size(); ++i)
        {
            const auto& g = m_.globals[i];
            const auto where = at("global", m_.imported_global_count() + i);
            const auto k = check_const(where, g.init);
            if (k && *k != g.type.kind)
                error(where, "type mismatch in global initializer");
        }
    }

    void check_function_signatures()
    {
        for (size_t i = 0; i < m_.functions.size(); ++i)
            if (m_.functions[i].type_index >= m_.types.size())
                error(at("func", m_.imported_function_count() + i), "type index out of range");
    }

    void check_exports()
    {
        std::set<std::string> names;
        for (size_t i = 0; i < m_.exports.size(); ++i)
        {
            const auto& e = m_.exports[i];
            if (!names.insert(e.name).second)
                error(at("export", i), "duplicate export name \"" + e.name + "\"");
            switch (e.kind)
            {
            case ExternKind::func:
                if (e.index >= m_.function_count())
                    error(at("export", i), "function index out of range");
                break;
            case ExternKind::table:
                if (e.index != 0 || !m_.has_table())
                    error(at("export", i), "table index out of range");
                break;
            case ExternKind::memory:
                if (e.index != 0 || !m_.has_memory())
                    error(at("export", i), "memory index out of range");
                break;
            case ExternKind::global:
                if (e.index >= m_.global_count())
                    error(at("export", i), "global index out of range");
                break;
            }
        }
    }

    bool function_type_ok(uint32_t index) const
    {
        const uint32_t imported = m_.imported_function_count();
        if (index < imported)
            return true;  // import type indices are checked separately
        return m_.functions[index - imported].type_index < m_.types.size();
    }

    void check_start()
    {
        if (!m_.start)
            return;
        if (*m_.start >= m_.function_count())
        {
            error("start", "function index out of range");
            return;
        }
        if (!function_type_ok(*m_.start) || !import_type_ok(*m_.start))
            return;
        const auto& t = m_.function_type(*m_.start);
        if (!t.params.empty() || !t.results.empty())
            error("start", "start function must have type () -> ()");
    }

    bool import_type_ok(uint32_t index) const
    {
        for (const auto& imp : m_.imports)
        {
            if (imp.kind != ExternKind::func)
                continue;
            if (index == 0)
                return imp.type_index < m_.types.size();
            --index;
        }
        return true;
    }

    void check_elements()
    {
        for (size_t i = 0; i < m_.elements.size(); ++i)
        {
            const auto& e = m_.elements[i];
            const auto where = at("elem", i);
            if (e.table_index != 0 || !m_.has_table())
                error(where, "table index out of range");
            if (const auto k = check_const(where, e.offset); k && *k != ValKind::I32)
                error(where, "type mismatch: element offset must be i32");
            for (const auto f : e.functions)
                if (f >= m_.function_count())
                {
                    error(where, "function index out of range");
                    break;
                }
        }
    }

    void check_data()
    {
        for (size_t i = 0; i < m_.data.size(); ++i)
        {
            const auto& d = m_.data[i];
            const auto where = at("data", i);
            if (d.memory_index != 0 || !m_.has_memory())
                error(where, "memory index out of range");
            if (const auto k = check_const(where, d.offset); k && *k != ValKind::I32)
                error(where, "type mismatch: data offset must be i32");
        }
    }

    void check_bodies()
    {
        // Bodies depend on consistent types/imports; skip them if those are broken.
        for (const auto& imp : m_.imports)
            if (imp.kind == ExternKind::func && imp.type_index >= m_.types.size())
                return;
        const uint32_t imported = m_.imported_function_count();
        for (size_t i = 0; i < m_.functions.size(); ++i)
        {
            const auto& f = m_.functions[i];
            if (f.type_index >= m_.types.size())
                continue;
            bool types_ok = true;
            for (const auto& fd : m_.functions)
                types_ok &= fd.type_index < m_.types.size();
            if (!types_ok)
                return;
            size_t instr = 0;
            try
            {
                FunctionChecker{m_, m_.types[f.type_index], f}.run(instr);
            }
            catch (const CheckFailure& failure)
            {
                error(at("func", imported + i) + " instr " + std::to_string(instr), failure.message);
            }
        }
    }

    const ModuleIR& m_;
    ValidationReport report_;
};

}  // namespace

std::string ValidationReport::to_string() const
{
    std::string s;
    for (const auto& d : diagnostics)
    {
        s += d.location;
        s += ": ";
        s += d.message;
        s += '\n';
    }
    return s;
}

bool ValidationReport::mentions(std::string_view text) const
{
    for (const auto& d : diagnostics)
        if (d.message.find(text) != std::string::npos)
            return true;
    return false;
}

ValidationReport validate(const ModuleIR& module)
{
    return ModuleChecker{module}.run();
}

}  // namespace gobi
