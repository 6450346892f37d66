// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/allocator.hpp"
#include "gobi/errors.hpp"
#include "gobi/instance.hpp"
#include "gobi/syscalls.hpp"
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace gobi {

enum class SandboxError
{
    InvalidSize,
    InvalidAlignment,
    AllocFailed,
    InvalidFree,
    DoubleFree,
    NullPointer,
    SwizzleOutOfBounds,
    WrongSandbox,
    CallbackSlotsExhausted,
    UnknownCallback,
    CallInProgress,
    StackInUse,
    NoStackPointer,
    NoLinearMemory,
};

std::string_view to_string(SandboxError e) noexcept;

class SandboxException : public Error
{
public:
    SandboxException(SandboxError code, const std::string& message);
    SandboxError code() const noexcept { return code_; }

private:
    SandboxError code_;
};

/// Offset into a sandbox's linear memory. 0 is null.
struct SandboxPtr
{
    uint32_t offset = 0;

    bool is_null() const noexcept { return offset == 0; }
    friend bool operator==(const SandboxPtr&, const SandboxPtr&) = default;
};

/// Validated host-side view of [offset, offset + length) in one sandbox.
struct HostRef
{
    uint64_t sandbox_id = 0;
    uint32_t offset = 0;
    uint32_t length = 0;

    friend bool operator==(const HostRef&, const HostRef&) = default;
};

struct CallbackHandle
{
    uint32_t slot = 0;
    FuncType signature;
};

/// Shadow stack region [base, top) carved from the heap.
struct ThreadStack
{
    uint32_t id = 0;
    uint32_t base = 0;
    uint32_t top = 0;

    uint32_t size() const noexcept { return top - base; }
};

class Sandbox
{
public:
    /// `env` may be null, in which case the sandbox gets an environment with
    /// nothing preopened. `extra` imports are linked alongside the syscalls.
    static Sandbox create(std::shared_ptr<const ModuleIR> module, ExecConfig config = {},
                          std::shared_ptr<HostEnv> env = nullptr, const HostModuleRegistry* extra = nullptr);
    static Sandbox create(std::span<const uint8_t> wasm, ExecConfig config = {},
                          std::shared_ptr<HostEnv> env = nullptr, const HostModuleRegistry* extra = nullptr);

    Sandbox(Sandbox&&) noexcept;
    Sandbox& operator=(Sandbox&&) noexcept;
    ~Sandbox();

    uint64_t id() const noexcept { return id_; }
    Instance& instance() noexcept { return *instance_; }
    const Instance& instance() const noexcept { return *instance_; }
    HostEnv& env() noexcept { return *env_; }

    uint32_t heap_base() const noexcept { return static_cast<uint32_t>(heap_.base()); }
    uint64_t heap_end();
    const HeapAllocator& heap();

    /// Zeroed block of at least `size` bytes. Grows memory once if needed.
    SandboxPtr malloc(uint32_t size, uint32_t align = 8);
    void free(SandboxPtr ptr);

    HostRef swizzle(SandboxPtr ptr, uint32_t length) const;
    SandboxPtr unswizzle(const HostRef& ref) const;
    /// Bytes behind `ref`, revalidated against the current memory.
    std::span<uint8_t> view(const HostRef& ref);

    SandboxPtr copy_into(std::span<const uint8_t> bytes);
    std::vector<uint8_t> copy_out(SandboxPtr ptr, uint32_t length) const;

    /// Traps come back in the result; caller errors throw InvokeError.
    ExecutionResult call_export(std::string_view name, std::span<const Value> args);
    ExecutionResult call_export(std::string_view name, std::initializer_list<Value> args)
    {
        return call_export(name, std::span<const Value>{args.begin(), args.size()});
    }

    CallbackHandle register_callback(FuncType signature, HostFunction fn);
    void unregister_callback(const CallbackHandle& handle);
    size_t callback_count() const noexcept { return callbacks_.size(); }

    ThreadStack create_thread_stack(uint32_t size);
    void destroy_thread_stack(const ThreadStack& stack);
    bool stack_in_use(const ThreadStack& stack) const;
    /// Runs an export with global 0 (the shadow stack pointer) set to
    /// stack.top; the previous value is restored afterwards, trap or not.
    ExecutionResult call_on_stack(const ThreadStack& stack, std::string_view name, std::span<const Value> args);
    ExecutionResult call_on_stack(const ThreadStack& stack, std::string_view name, std::initializer_list<Value> args)
    {
        return call_on_stack(stack, name, std::span<const Value>{args.begin(), args.size()});
    }

private:
    struct StackState
    {
        uint32_t base = 0;
        uint32_t top = 0;
        bool in_use = false;
    };

    Sandbox() = default;
    void sync_heap();
    void check_idle(std::string_view what) const;
    StackState& stack_state(const ThreadStack& stack);

    uint64_t id_ = 0;
    std::shared_ptr<HostEnv> env_;
    std::unique_ptr<Instance> instance_;
    HeapAllocator heap_;
    std::map<uint32_t, FuncType> callbacks_;  // slot -> signature
    std::map<uint32_t, StackState> stacks_;
    uint32_t next_stack_id_ = 1;
};

}  // namespace gobi
