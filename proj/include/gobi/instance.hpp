// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/memory.hpp"
#include "gobi/module.hpp"
#include "gobi/trap.hpp"
#include "gobi/types.hpp"
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gobi {

struct ExecConfig
{
    uint32_t max_call_depth = 1024;
    std::optional<uint64_t> fuel;  // instruction budget per invocation
    BoundsStrategy strategy = BoundsStrategy::checked;
    bool deterministic = false;
    /// Required to construct anything with BoundsStrategy::unchecked.
    bool allow_unchecked = false;
    /// Empty table slots appended after the module's table for host callbacks.
    uint32_t callback_slots = 32;
    /// Host cap on memory growth, in pages; combined with the module maximum.
    std::optional<uint32_t> max_pages;
    /// Sentinel bytes placed before and after linear memory (test instrumentation).
    size_t canary_bytes = 0;
    /// Operand stack size in 8-byte slots, shared by all frames of one invocation.
    uint32_t stack_slots = 1u << 18;
};

/// Throws ConfigError when `config` breaks an ExecConfig invariant.
void check_config(const ExecConfig& config);

class Instance;

using HostFunction = std::function<std::vector<Value>(Instance&, std::span<const Value>)>;

struct HostFunc
{
    FuncType type;
    HostFunction fn;
};

/// Supplies imports during instantiation.
class ImportResolver
{
public:
    virtual ~ImportResolver() = default;
    virtual const HostFunc* resolve_function(std::string_view module, std::string_view field) const = 0;
    virtual std::optional<Value> resolve_global(std::string_view module, std::string_view field) const = 0;
};

/// Simple map-backed resolver.
class HostModuleRegistry : public ImportResolver
{
public:
    void add_function(std::string module, std::string field, FuncType type, HostFunction fn);
    void add_global(std::string module, std::string field, Value value);
    /// Copies every entry of `other`, replacing entries with equal names.
    void merge(const HostModuleRegistry& other);

    const HostFunc* resolve_function(std::string_view module, std::string_view field) const override;
    std::optional<Value> resolve_global(std::string_view module, std::string_view field) const override;

private:
    std::map<std::pair<std::string, std::string>, HostFunc, std::less<>> functions_;
    std::map<std::pair<std::string, std::string>, Value, std::less<>> globals_;
};

struct ExecutionResult
{
    std::vector<Value> values;
    std::optional<Trap> trap;

    bool trapped() const noexcept { return trap.has_value(); }
};

/// One table slot: empty, a module function, or a host function.
struct TableEntry
{
    enum class Kind : uint8_t { empty, wasm, host };
    Kind kind = Kind::empty;
    uint32_t index = 0;   // function index (wasm) or host function slot (host)
    uint32_t sig_id = 0;  // canonical signature id

    friend bool operator==(const TableEntry&, const TableEntry&) = default;
};

namespace detail {
struct CompiledCode;
class Executor;
}  // namespace detail

class Instance
{
public:
    ~Instance();
    Instance(const Instance&) = delete;
    Instance& operator=(const Instance&) = delete;

    const ModuleIR& module() const noexcept { return *module_; }
    const std::shared_ptr<const ModuleIR>& module_ptr() const noexcept { return module_; }
    const ExecConfig& config() const noexcept { return config_; }

    bool has_memory() const noexcept { return memory_.has_value(); }
    /// Throws Error when the module has no memory.
    LinearMemory& memory();
    const LinearMemory& memory() const;

    /// Calls an exported function. Caller errors throw InvokeError; traps are
    /// returned in the result.
    ExecutionResult invoke(std::string_view export_name, std::span<const Value> args);
    ExecutionResult invoke(std::string_view export_name, std::initializer_list<Value> args)
    {
        return invoke(export_name, std::span<const Value>{args.begin(), args.size()});
    }
    ExecutionResult invoke_function(uint32_t func_index, std::span<const Value> args);

    /// memory.grow from the host side; same result convention.
    uint32_t grow_memory(uint32_t delta_pages);

    /// Bounds-checked host copies; throw OutOfBoundsError, never partial.
    void read_memory(uint32_t offset, std::span<uint8_t> out) const;
    void write_memory(uint32_t offset, std::span<const uint8_t> in);
    std::vector<uint8_t> read_memory(uint32_t offset, uint32_t length) const;

    uint32_t global_count() const noexcept { return static_cast<uint32_t>(globals_.size()); }
    Value global(uint32_t index) const;
    /// Host write; kind must match. Mutability is not enforced for the host.
    void set_global(uint32_t index, Value value);

    size_t table_size() const noexcept { return table_.size(); }
    const TableEntry& table_entry(uint32_t slot) const { return table_.at(slot); }
    /// First slot of the reserved callback range and its length.
    uint32_t callback_base() const noexcept { return callback_base_; }
    uint32_t callback_count() const noexcept { return config_.callback_slots; }
    void set_host_entry(uint32_t slot, FuncType type, HostFunction fn);
    void clear_entry(uint32_t slot);
    const FuncType& signature(uint32_t sig_id) const { return signatures_.at(sig_id); }

    /// True while an invocation is on the stack (including nested host calls).
    bool executing() const noexcept { return depth_ > 0; }
    /// Remaining fuel after the last invocation (metered configs only).
    std::optional<uint64_t> fuel_remaining() const noexcept;

private:
    friend std::unique_ptr<Instance> instantiate(std::shared_ptr<const ModuleIR>, const ImportResolver&,
                                                 ExecConfig);
    friend class detail::Executor;

    Instance(std::shared_ptr<const ModuleIR> module, ExecConfig config);
    uint32_t intern(const FuncType& type);
    ExecutionResult run(uint32_t func_index, std::span<const Value> args);

    std::shared_ptr<const ModuleIR> module_;
    ExecConfig config_;
    std::optional<LinearMemory> memory_;
    std::vector<uint64_t> globals_;
    std::vector<ValKind> global_kinds_;
    std::vector<TableEntry> table_;
    uint32_t callback_base_ = 0;
    std::vector<FuncType> signatures_;     // canonical signature per id
    std::vector<uint32_t> type_sig_;       // module type index -> sig id
    std::vector<HostFunc> host_funcs_;     // imports first, then callbacks
    std::vector<uint32_t> host_free_;      // recycled host_funcs_ slots
    std::unique_ptr<detail::CompiledCode> code_;

    std::vector<uint64_t> stack_;
    uint64_t* stack_base_ = nullptr;  // first page-aligned slot of stack_
    uint64_t* stack_top_ = nullptr;  // first free slot while executing
    uint64_t* stack_end_ = nullptr;
    uint32_t depth_ = 0;
    uint64_t fuel_ = 0;
};

/// Validates, links and initializes `module`. Throws ValidationError,
/// InstantiationError or ConfigError; no partially built instance escapes.
std::unique_ptr<Instance> instantiate(std::shared_ptr<const ModuleIR> module, const ImportResolver& imports,
                                      ExecConfig config = {});

}  // namespace gobi
