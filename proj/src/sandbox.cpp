// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/sandbox.hpp"
#include "gobi/binary.hpp"
#include <algorithm>
#include <atomic>
#include <bit>
#include <cstring>

namespace gobi {

namespace {

std::atomic<uint64_t> next_sandbox_id{1};

[[noreturn]] void fail(SandboxError code, const std::string& message)
{
    throw SandboxException{code, message};
}

constexpr uint64_t align_up(uint64_t v, uint64_t a) noexcept
{
    return (v + a - 1) & ~(a - 1);
}

}  // namespace

std::string_view to_string(SandboxError e) noexcept
{
    switch (e)
    {
    case SandboxError::InvalidSize: return "InvalidSize";
    case SandboxError::InvalidAlignment: return "InvalidAlignment";
    case SandboxError::AllocFailed: return "AllocFailed";
    case SandboxError::InvalidFree: return "InvalidFree";
    case SandboxError::DoubleFree: return "DoubleFree";
    case SandboxError::NullPointer: return "NullPointer";
    case SandboxError::SwizzleOutOfBounds: return "SwizzleOutOfBounds";
    case SandboxError::WrongSandbox: return "WrongSandbox";
    case SandboxError::CallbackSlotsExhausted: return "CallbackSlotsExhausted";
    case SandboxError::UnknownCallback: return "UnknownCallback";
    case SandboxError::CallInProgress: return "CallInProgress";
    case SandboxError::StackInUse: return "StackInUse";
    case SandboxError::NoStackPointer: return "NoStackPointer";
    case SandboxError::NoLinearMemory: return "NoLinearMemory";
    }
    return "?";
}

SandboxException::SandboxException(SandboxError code, const std::string& message)
  : Error{std::string{to_string(code)} + ": " + message}, code_{code}
{}

Sandbox Sandbox::create(std::shared_ptr<const ModuleIR> module, ExecConfig config, std::shared_ptr<HostEnv> env,
                        const HostModuleRegistry* extra)
{
    if (!module->has_memory())
        fail(SandboxError::NoLinearMemory, "no linear memory");
    if (!env)
        env = std::make_shared<HostEnv>();

    HostModuleRegistry imports = env->imports();
    if (extra != nullptr)
        imports.merge(*extra);

    Sandbox sb;
    sb.id_ = next_sandbox_id.fetch_add(1);
    sb.env_ = std::move(env);
    sb.instance_ = instantiate(std::move(module), imports, config);

    // Heap starts after the highest initialized byte; offset 0 stays null.
    uint64_t heap_base = 8;
    for (const DataSegment& seg : sb.instance_->module().data)
    {
        uint64_t offset = seg.offset.instr.value & 0xffffffff;
        if (seg.offset.instr.op == Opcode::global_get)
            offset = sb.instance_->global(seg.offset.instr.index).as_u32();
        heap_base = std::max(heap_base, offset + seg.bytes.size());
    }
    sb.heap_ = HeapAllocator{align_up(heap_base, HeapAllocator::granule), sb.instance_->memory().size_bytes()};
    return sb;
}

Sandbox Sandbox::create(std::span<const uint8_t> wasm, ExecConfig config, std::shared_ptr<HostEnv> env,
                        const HostModuleRegistry* extra)
{
    return create(std::make_shared<const ModuleIR>(decode_binary(wasm)), config, std::move(env), extra);
}

Sandbox::Sandbox(Sandbox&&) noexcept = default;
Sandbox& Sandbox::operator=(Sandbox&&) noexcept = default;
Sandbox::~Sandbox() = default;

// Module code may have grown memory since the last host-side operation.
void Sandbox::sync_heap()
{
    heap_.extend(instance_->memory().size_bytes());
}

uint64_t Sandbox::heap_end()
{
    sync_heap();
    return heap_.end();
}

const HeapAllocator& Sandbox::heap()
{
    sync_heap();
    return heap_;
}

SandboxPtr Sandbox::malloc(uint32_t size, uint32_t align)
{
    if (size == 0)
        fail(SandboxError::InvalidSize, "allocation size 0");
    if (!std::has_single_bit(align) || align > HeapAllocator::max_align)
        fail(SandboxError::InvalidAlignment, "alignment " + std::to_string(align));

    sync_heap();
    auto at = heap_.allocate(size, align);
    if (!at)
    {
        // One growth attempt sized so the tail block can hold the request.
        const uint64_t need = align_up(size, HeapAllocator::granule) + std::max(align, HeapAllocator::granule);
        const uint64_t tail = heap_.tail_free();
        const uint64_t pages = (need - std::min(need, tail) + page_size - 1) / page_size;
        if (pages != 0 && pages <= UINT32_MAX &&
            instance_->grow_memory(static_cast<uint32_t>(pages)) != grow_failed)
        {
            sync_heap();
            at = heap_.allocate(size, align);
        }
    }
    if (!at)
        fail(SandboxError::AllocFailed, "no room for " + std::to_string(size) + " bytes");

    const uint64_t length = *heap_.allocation_size(*at);
    std::memset(instance_->memory().data() + *at, 0, length);
    return SandboxPtr{*at};
}

void Sandbox::free(SandboxPtr ptr)
{
    switch (heap_.free(ptr.offset))
    {
    case HeapAllocator::FreeStatus::ok: return;
    case HeapAllocator::FreeStatus::double_free:
        fail(SandboxError::DoubleFree, "offset " + std::to_string(ptr.offset) + " already freed");
    case HeapAllocator::FreeStatus::invalid:
        fail(SandboxError::InvalidFree, "offset " + std::to_string(ptr.offset) + " is not a live allocation");
    }
}

HostRef Sandbox::swizzle(SandboxPtr ptr, uint32_t length) const
{
    if (ptr.is_null())
        fail(SandboxError::NullPointer, "null pointer");
    if (!instance_->memory().in_bounds(ptr.offset, length))
        fail(SandboxError::SwizzleOutOfBounds,
             "[" + std::to_string(ptr.offset) + ", +" + std::to_string(length) + ") outside memory");
    return HostRef{id_, ptr.offset, length};
}

SandboxPtr Sandbox::unswizzle(const HostRef& ref) const
{
    if (ref.sandbox_id != id_)
        fail(SandboxError::WrongSandbox, "reference belongs to sandbox " + std::to_string(ref.sandbox_id));
    if (!instance_->memory().in_bounds(ref.offset, ref.length))
        fail(SandboxError::SwizzleOutOfBounds, "stale reference");
    return SandboxPtr{ref.offset};
}

std::span<uint8_t> Sandbox::view(const HostRef& ref)
{
    const SandboxPtr p = unswizzle(ref);
    return {instance_->memory().data() + p.offset, ref.length};
}

SandboxPtr Sandbox::copy_into(std::span<const uint8_t> bytes)
{
    if (bytes.size() > UINT32_MAX)
        fail(SandboxError::InvalidSize, "copy larger than the address space");
    const SandboxPtr p = malloc(static_cast<uint32_t>(bytes.size()));
    instance_->write_memory(p.offset, bytes);
    return p;
}

std::vector<uint8_t> Sandbox::copy_out(SandboxPtr ptr, uint32_t length) const
{
    return instance_->read_memory(ptr.offset, length);
}

ExecutionResult Sandbox::call_export(std::string_view name, std::span<const Value> args)
{
    return instance_->invoke(name, args);
}

void Sandbox::check_idle(std::string_view what) const
{
    if (instance_->executing())
        fail(SandboxError::CallInProgress, std::string{what} + " during a sandbox call");
}

CallbackHandle Sandbox::register_callback(FuncType signature, HostFunction fn)
{
    check_idle("callback registration");
    const uint32_t base = instance_->callback_base();
    for (uint32_t slot = base; slot < base + instance_->callback_count(); ++slot)
    {
        if (callbacks_.count(slot) != 0)
            continue;
        instance_->set_host_entry(slot, signature, std::move(fn));
        callbacks_.emplace(slot, signature);
        return CallbackHandle{slot, std::move(signature)};
    }
    fail(SandboxError::CallbackSlotsExhausted,
         "all " + std::to_string(instance_->callback_count()) + " callback slots in use");
}

void Sandbox::unregister_callback(const CallbackHandle& handle)
{
    check_idle("callback removal");
    const auto it = callbacks_.find(handle.slot);
    if (it == callbacks_.end())
        fail(SandboxError::UnknownCallback, "slot " + std::to_string(handle.slot) + " has no callback");
    instance_->clear_entry(handle.slot);
    callbacks_.erase(it);
}

ThreadStack Sandbox::create_thread_stack(uint32_t size)
{
    if (size == 0 || size > UINT32_MAX - 15)
        fail(SandboxError::InvalidSize, "stack size " + std::to_string(size));
    const uint32_t rounded = static_cast<uint32_t>(align_up(size, 16));
    const SandboxPtr p = malloc(rounded, 16);
    const uint32_t id = next_stack_id_++;
    stacks_.emplace(id, StackState{p.offset, p.offset + rounded, false});
    return ThreadStack{id, p.offset, p.offset + rounded};
}

Sandbox::StackState& Sandbox::stack_state(const ThreadStack& stack)
{
    const auto it = stacks_.find(stack.id);
    if (it == stacks_.end() || it->second.base != stack.base)
        fail(SandboxError::InvalidFree, "unknown thread stack " + std::to_string(stack.id));
    return it->second;
}

void Sandbox::destroy_thread_stack(const ThreadStack& stack)
{
    StackState& s = stack_state(stack);
    if (s.in_use)
        fail(SandboxError::StackInUse, "thread stack " + std::to_string(stack.id) + " in use");
    free(SandboxPtr{s.base});
    stacks_.erase(stack.id);
}

bool Sandbox::stack_in_use(const ThreadStack& stack) const
{
    const auto it = stacks_.find(stack.id);
    return it != stacks_.end() && it->second.in_use;
}

ExecutionResult Sandbox::call_on_stack(const ThreadStack& stack, std::string_view name, std::span<const Value> args)
{
    const ModuleIR& m = instance_->module();
    if (m.global_count() == 0 || m.global_type(0) != GlobalType{ValKind::I32, true})
        fail(SandboxError::NoStackPointer, "global 0 is not a mutable i32");
    StackState& s = stack_state(stack);
    if (s.in_use)
        fail(SandboxError::StackInUse, "thread stack " + std::to_string(stack.id) + " in use");

    struct Restore
    {
        Instance& inst;
        StackState& state;
        Value saved;
        ~Restore()
        {
            inst.set_global(0, saved);
            state.in_use = false;
        }
    };
    Restore restore{*instance_, s, instance_->global(0)};
    s.in_use = true;
    instance_->set_global(0, Value::i32(s.top));
    return instance_->invoke(name, args);
}

}  // namespace gobi
