// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/instance.hpp"
#include "code.hpp"
#include "gobi/errors.hpp"
#include "gobi/validate.hpp"
#include <algorithm>

namespace gobi {

namespace {

std::string kinds_to_string(std::span<const ValKind> kinds)
{
    std::string s = "(";
    for (size_t i = 0; i < kinds.size(); ++i)
    {
        if (i != 0)
            s += ' ';
        s += to_string(kinds[i]);
    }
    return s + ")";
}

std::string import_name(const Import& imp)
{
    return imp.module + "." + imp.field;
}

}  // namespace

void check_config(const ExecConfig& config)
{
    if (config.strategy == BoundsStrategy::unchecked && !config.allow_unchecked)
        throw ConfigError{"unchecked bounds strategy requires the explicit unsafe flag"};
    if (config.fuel && *config.fuel == 0)
        throw ConfigError{"fuel must be greater than zero"};
    if (config.max_call_depth == 0)
        throw ConfigError{"max_call_depth must be greater than zero"};
    if (config.stack_slots < 64)
        throw ConfigError{"stack_slots must be at least 64"};
}

void HostModuleRegistry::add_function(std::string module, std::string field, FuncType type, HostFunction fn)
{
    functions_[{std::move(module), std::move(field)}] = HostFunc{std::move(type), std::move(fn)};
}

void HostModuleRegistry::add_global(std::string module, std::string field, Value value)
{
    globals_.insert_or_assign({std::move(module), std::move(field)}, value);
}

void HostModuleRegistry::merge(const HostModuleRegistry& other)
{
    for (const auto& [key, fn] : other.functions_)
        functions_[key] = fn;
    for (const auto& [key, value] : other.globals_)
        globals_.insert_or_assign(key, value);
}

const HostFunc* HostModuleRegistry::resolve_function(std::string_view module, std::string_view field) const
{
    const auto it = functions_.find(std::pair{std::string{module}, std::string{field}});
    return it == functions_.end() ? nullptr : &it->second;
}

std::optional<Value> HostModuleRegistry::resolve_global(std::string_view module, std::string_view field) const
{
    const auto it = globals_.find(std::pair{std::string{module}, std::string{field}});
    if (it == globals_.end())
        return std::nullopt;
    return it->second;
}

Instance::Instance(std::shared_ptr<const ModuleIR> module, ExecConfig config)
  : module_{std::move(module)}, config_{std::move(config)}
{}

Instance::~Instance() = default;

uint32_t Instance::intern(const FuncType& type)
{
    const auto it = std::find(signatures_.begin(), signatures_.end(), type);
    if (it != signatures_.end())
        return static_cast<uint32_t>(it - signatures_.begin());
    signatures_.push_back(type);
    return static_cast<uint32_t>(signatures_.size() - 1);
}

LinearMemory& Instance::memory()
{
    if (!memory_)
        throw Error{"module has no linear memory"};
    return *memory_;
}

const LinearMemory& Instance::memory() const
{
    if (!memory_)
        throw Error{"module has no linear memory"};
    return *memory_;
}

uint32_t Instance::grow_memory(uint32_t delta_pages)
{
    return memory().grow(delta_pages);
}

void Instance::read_memory(uint32_t offset, std::span<uint8_t> out) const
{
    memory().read(offset, out);
}

void Instance::write_memory(uint32_t offset, std::span<const uint8_t> in)
{
    memory().write(offset, in);
}

std::vector<uint8_t> Instance::read_memory(uint32_t offset, uint32_t length) const
{
    std::vector<uint8_t> out(length);
    memory().read(offset, out);
    return out;
}

Value Instance::global(uint32_t index) const
{
    return Value::from_bits(global_kinds_.at(index), globals_.at(index));
}

void Instance::set_global(uint32_t index, Value value)
{
    if (global_kinds_.at(index) != value.kind())
        throw Error{"global " + std::to_string(index) + " has kind " + std::string{to_string(global_kinds_[index])}};
    globals_[index] = value.bits();
}

void Instance::set_host_entry(uint32_t slot, FuncType type, HostFunction fn)
{
    if (executing())
        throw InvokeError{InvokeError::Kind::reentrancy, "table cannot change while a call is in progress"};
    if (slot >= table_.size())
        throw Error{"table slot out of range"};
    clear_entry(slot);
    const uint32_t sig = intern(type);
    uint32_t host_index;
    if (!host_free_.empty())
    {
        host_index = host_free_.back();
        host_free_.pop_back();
        host_funcs_[host_index] = HostFunc{std::move(type), std::move(fn)};
    }
    else
    {
        host_index = static_cast<uint32_t>(host_funcs_.size());
        host_funcs_.push_back(HostFunc{std::move(type), std::move(fn)});
    }
    table_[slot] = TableEntry{TableEntry::Kind::host, host_index, sig};
}

void Instance::clear_entry(uint32_t slot)
{
    if (executing())
        throw InvokeError{InvokeError::Kind::reentrancy, "table cannot change while a call is in progress"};
    TableEntry& e = table_.at(slot);
    // Host slots below the import count belong to imported functions.
    if (e.kind == TableEntry::Kind::host && e.index >= module_->imported_function_count())
    {
        const bool shared = std::count_if(table_.begin(), table_.end(), [&](const TableEntry& o) {
                                return o.kind == TableEntry::Kind::host && o.index == e.index;
                            }) > 1;
        if (!shared)
        {
            host_funcs_[e.index] = HostFunc{};
            host_free_.push_back(e.index);
        }
    }
    e = TableEntry{};
}

std::optional<uint64_t> Instance::fuel_remaining() const noexcept
{
    if (!config_.fuel)
        return std::nullopt;
    return fuel_;
}

ExecutionResult Instance::invoke(std::string_view export_name, std::span<const Value> args)
{
    const Export* exp = module_->find_export(export_name);
    if (exp == nullptr)
        throw InvokeError{InvokeError::Kind::unknown_export, "unknown export: " + std::string{export_name}};
    if (exp->kind != ExternKind::func)
        throw InvokeError{InvokeError::Kind::not_a_function,
                          "export " + std::string{export_name} + " is a " + std::string{to_string(exp->kind)}};
    return invoke_function(exp->index, args);
}

ExecutionResult Instance::invoke_function(uint32_t func_index, std::span<const Value> args)
{
    if (func_index >= module_->function_count())
        throw InvokeError{InvokeError::Kind::unknown_export, "function index out of range"};
    const FuncType& type = module_->function_type(func_index);
    bool match = args.size() == type.params.size();
    for (size_t i = 0; match && i < args.size(); ++i)
        match = args[i].kind() == type.params[i];
    if (!match)
    {
        std::vector<ValKind> got;
        for (const Value& v : args)
            got.push_back(v.kind());
        throw InvokeError{InvokeError::Kind::argument_mismatch,
                          "expected " + kinds_to_string(type.params) + ", got " + kinds_to_string(got)};
    }
    return run(func_index, args);
}

std::unique_ptr<Instance> instantiate(std::shared_ptr<const ModuleIR> module, const ImportResolver& imports,
                                      ExecConfig config)
{
    check_config(config);
    if (!module)
        throw InstantiationError{"null module"};
    const ValidationReport report = validate(*module);
    if (!report.ok)
        throw ValidationError{report.to_string()};

    std::unique_ptr<Instance> inst{new Instance{module, std::move(config)}};
    const ModuleIR& m = *module;
    const ExecConfig& cfg = inst->config_;

    for (const FuncType& t : m.types)
        inst->type_sig_.push_back(inst->intern(t));

    for (const Import& imp : m.imports)
    {
        switch (imp.kind)
        {
        case ExternKind::func:
        {
            const FuncType& want = m.types[imp.type_index];
            const HostFunc* fn = imports.resolve_function(imp.module, imp.field);
            if (fn == nullptr)
                throw InstantiationError{"unresolved import " + import_name(imp)};
            if (fn->type != want)
                throw InstantiationError{"import " + import_name(imp) + " has type " + to_string(fn->type) +
                                         ", expected " + to_string(want)};
            inst->host_funcs_.push_back(*fn);
            break;
        }
        case ExternKind::global:
        {
            const auto v = imports.resolve_global(imp.module, imp.field);
            if (!v)
                throw InstantiationError{"unresolved import " + import_name(imp)};
            if (v->kind() != imp.global.kind)
                throw InstantiationError{"import " + import_name(imp) + " has kind " +
                                         std::string{to_string(v->kind())} + ", expected " +
                                         std::string{to_string(imp.global.kind)}};
            inst->globals_.push_back(v->bits());
            inst->global_kinds_.push_back(v->kind());
            break;
        }
        case ExternKind::table:
        case ExternKind::memory:
            throw InstantiationError{"importing a " + std::string{to_string(imp.kind)} +
                                     " is not supported: " + import_name(imp)};
        }
    }

    auto eval = [&](const ConstExpr& e) -> uint64_t {
        if (e.instr.op == Opcode::global_get)
            return inst->globals_.at(e.instr.index);
        return e.instr.value;
    };

    for (const GlobalDef& g : m.globals)
    {
        inst->globals_.push_back(eval(g.init));
        inst->global_kinds_.push_back(g.type.kind);
    }

    if (m.memory)
    {
        const Limits& lim = m.memory->limits;
        std::optional<uint32_t> max = lim.max;
        if (cfg.max_pages)
            max = std::min(max.value_or(max_pages), *cfg.max_pages);
        if (max && lim.min > *max)
            throw InstantiationError{"memory minimum exceeds configured maximum"};
        try
        {
            inst->memory_.emplace(lim.min, max, cfg.strategy, cfg.canary_bytes);
        }
        catch (const std::bad_alloc&)
        {
            throw InstantiationError{"cannot allocate linear memory"};
        }
    }

    const uint32_t declared = m.table ? m.table->limits.min : 0;
    inst->callback_base_ = declared;
    inst->table_.resize(uint64_t{declared} + cfg.callback_slots);

    const uint32_t imported_funcs = m.imported_function_count();
    for (const ElemSegment& seg : m.elements)
    {
        const auto offset = static_cast<uint32_t>(eval(seg.offset));
        if (uint64_t{offset} + seg.functions.size() > declared)
            throw InstantiationError{"element segment out of bounds"};
    }
    for (const DataSegment& seg : m.data)
    {
        const auto offset = static_cast<uint32_t>(eval(seg.offset));
        if (!inst->memory_ || !inst->memory_->in_bounds(offset, seg.bytes.size()))
            throw InstantiationError{"data segment out of bounds"};
    }
    for (const ElemSegment& seg : m.elements)
    {
        auto slot = static_cast<uint32_t>(eval(seg.offset));
        for (uint32_t f : seg.functions)
        {
            const uint32_t sig = inst->type_sig_[f < imported_funcs ? m.imports[f].type_index
                                                                    : m.functions[f - imported_funcs].type_index];
            const auto kind = f < imported_funcs ? TableEntry::Kind::host : TableEntry::Kind::wasm;
            inst->table_[slot++] = TableEntry{kind, f, sig};
        }
    }
    for (const DataSegment& seg : m.data)
        inst->memory_->write(static_cast<uint32_t>(eval(seg.offset)), seg.bytes);

    inst->code_ = std::make_unique<detail::CompiledCode>(detail::compile(m, inst->type_sig_));

    if (m.start)
    {
        const ExecutionResult r = inst->run(*m.start, {});
        if (r.trap)
            throw InstantiationError{"start function trapped: " + std::string{to_string(r.trap->kind)}};
    }
    return inst;
}

}  // namespace gobi
