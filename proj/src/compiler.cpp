// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "code.hpp"
#include "fused.hpp"
#include "numeric_sig.hpp"
#include <algorithm>
#include <limits>
#include <stdexcept>

namespace gobi::detail {
namespace {

constexpr size_t no_op = std::numeric_limits<size_t>::max();

uint64_t call_shape(const FuncType& type)
{
    return uint64_t{static_cast<uint32_t>(type.params.size())} |
           (uint64_t{static_cast<uint32_t>(type.results.size())} << 32);
}

class FunctionCompiler
{
public:
    FunctionCompiler(const ModuleIR& module, std::span<const uint32_t> type_sig)
      : module_{module}, type_sig_{type_sig}
    {}

    CompiledFunction run(const FuncDef& def)
    {
        const FuncType& type = module_.types.at(def.type_index);
        out_ = {};
        out_.num_params = static_cast<uint32_t>(type.params.size());
        out_.num_results = static_cast<uint32_t>(type.results.size());
        out_.num_locals = static_cast<uint32_t>(def.locals.size());
        ctrls_.clear();
        height_ = 0;
        fence_ = 0;
        ctrls_.push_back({Opcode::block, 0, out_.num_results, 0, {}, no_op});

        for (const Instr& in : def.body)
        {
            if (ctrls_.empty())
                throw std::logic_error{"instructions after function end"};
            lower(in);
        }
        if (!ctrls_.empty())
            throw std::logic_error{"function body is not terminated"};
        return std::move(out_);
    }

private:
    struct Fixup
    {
        bool in_table;
        size_t index;
    };

    struct Ctrl
    {
        Opcode kind;
        uint32_t height;
        uint32_t arity;
        uint32_t start_pc;
        std::vector<Fixup> fixups;
        size_t if_op;
    };

    uint32_t pc() const { return static_cast<uint32_t>(out_.code.size()); }

    // Index of the last op when it may be rewritten: no branch lands
    // between it and the next op.
    Op* last_fusable()
    {
        if (out_.code.empty() || pc() - 1 < fence_)
            return nullptr;
        return &out_.code.back();
    }

    void bind_label() { fence_ = pc(); }

    void emit_i32_binop(uint8_t byte)
    {
        Op* prev = last_fusable();
        Shape shape = Shape::ss;
        uint64_t operands = 0;
        if (prev != nullptr && prev->code == static_cast<uint8_t>(Opcode::i32_const))
        {
            shape = Shape::sk;
            operands = static_cast<uint32_t>(prev->b);
        }
        else if (prev != nullptr && prev->code == static_cast<uint8_t>(Opcode::local_get))
        {
            shape = Shape::sl;
            operands = prev->a;
        }
        if (shape != Shape::ss)
        {
            out_.code.pop_back();
            prev = last_fusable();
            if (prev != nullptr && prev->code == static_cast<uint8_t>(Opcode::local_get))
            {
                shape = shape == Shape::sk ? Shape::lk : Shape::ll;
                operands = prev->a | (operands << 32);
                out_.code.pop_back();
            }
        }
        if (shape == Shape::ss)
            emit(byte);
        else
            emit(fused_code(shape, Dest::push, byte), 0, operands);
    }

    // Folds a local.set / local.tee into a preceding i32 binary op.
    bool fuse_store_local(Dest dest, uint32_t local)
    {
        Op* prev = last_fusable();
        if (prev == nullptr)
            return false;
        if (prev->code < 0x100 && fusable_i32(static_cast<uint8_t>(prev->code)))
            prev->code = fused_code(Shape::ss, Dest::push, static_cast<uint8_t>(prev->code));
        if (!is_fused(prev->code) || fused_dest(prev->code) != Dest::push)
            return false;
        prev->code = fused_code(fused_shape(prev->code), dest, fused_op(prev->code));
        prev->a = local;
        return true;
    }

    size_t emit(uint16_t code, uint32_t a = 0, uint64_t b = 0)
    {
        out_.code.push_back({code, a, b});
        return out_.code.size() - 1;
    }

    void push(uint32_t n = 1)
    {
        height_ += n;
        out_.max_height = std::max(out_.max_height, height_);
    }

    // Unreachable code may pop below the frame; clamp so dead code keeps
    // a consistent (never executed) height.
    void pop(uint32_t n = 1)
    {
        const uint32_t floor = ctrls_.back().height;
        height_ = height_ >= floor + n ? height_ - n : floor;
    }

    void set_unreachable() { height_ = ctrls_.back().height; }

    void patch(const Fixup& f, uint32_t target)
    {
        if (f.in_table)
            out_.targets[f.index].pc = target;
        else
            out_.code[f.index].a = target;
    }

    Ctrl& label(uint32_t depth) { return ctrls_[ctrls_.size() - 1 - depth]; }

    static uint32_t label_arity(const Ctrl& c) { return c.kind == Opcode::loop ? 0 : c.arity; }

    void branch(uint32_t depth, bool conditional)
    {
        Ctrl& target = label(depth);
        const uint32_t arity = label_arity(target);
        size_t op;
        Op* prev = conditional ? last_fusable() : nullptr;
        if (prev != nullptr && height_ == target.height + arity &&
            (prev->code == static_cast<uint8_t>(Opcode::i32_eqz) ||
             (prev->code < 0x100 && fusable_i32(static_cast<uint8_t>(prev->code))) ||
             (is_fused(prev->code) && fused_dest(prev->code) == Dest::push)))
        {
            if (prev->code == static_cast<uint8_t>(Opcode::i32_eqz))
                *prev = {x_jump_unless, 0, 0};
            else if (prev->code < 0x100)
                *prev = {fused_code(Shape::ss, Dest::jump, static_cast<uint8_t>(prev->code)), 0, 0};
            else
                prev->code = fused_code(fused_shape(prev->code), Dest::jump, fused_op(prev->code));
            op = out_.code.size() - 1;
        }
        else if (height_ == target.height + arity)
            op = emit(conditional ? x_jump_if : x_jump);
        else
            op = emit(conditional ? x_br_if : x_br, 0, uint64_t{target.height} | (uint64_t{arity} << 32));
        if (target.kind == Opcode::loop)
            out_.code[op].a = target.start_pc;
        else
            target.fixups.push_back({false, op});
    }

    void lower(const Instr& in)
    {
        using enum Opcode;
        const auto byte = static_cast<uint8_t>(in.op);
        switch (in.op)
        {
        case nop:
            return;
        case unreachable:
            emit(byte);
            set_unreachable();
            return;
        case block:
        case loop:
            if (in.op == loop)
                bind_label();
            ctrls_.push_back({in.op, height_, in.block.result ? 1u : 0u, pc(), {}, no_op});
            return;
        case if_:
        {
            pop();
            const size_t op = emit(x_jump_unless);
            ctrls_.push_back({if_, height_, in.block.result ? 1u : 0u, pc(), {}, op});
            return;
        }
        case else_:
        {
            Ctrl& c = ctrls_.back();
            c.fixups.push_back({false, emit(x_jump)});
            out_.code[c.if_op].a = pc();
            c.if_op = no_op;
            c.kind = else_;
            height_ = c.height;
            bind_label();
            return;
        }
        case end:
        {
            Ctrl c = std::move(ctrls_.back());
            ctrls_.pop_back();
            if (ctrls_.empty())
            {
                height_ = c.height + c.arity;
                const uint32_t target = pc();
                emit(x_end);
                for (const Fixup& f : c.fixups)
                    patch(f, target);
                return;
            }
            if (c.if_op != no_op)
                out_.code[c.if_op].a = pc();
            for (const Fixup& f : c.fixups)
                patch(f, pc());
            bind_label();
            height_ = c.height + c.arity;
            push(0);
            return;
        }
        case br:
            branch(in.index, false);
            set_unreachable();
            return;
        case br_if:
            pop();
            branch(in.index, true);
            return;
        case br_table:
        {
            pop();
            const auto start = static_cast<uint32_t>(out_.targets.size());
            auto add = [&](uint32_t depth) {
                Ctrl& target = label(depth);
                out_.targets.push_back({target.start_pc, target.height, label_arity(target)});
                if (target.kind != Opcode::loop)
                    target.fixups.push_back({true, out_.targets.size() - 1});
            };
            for (uint32_t depth : in.targets)
                add(depth);
            add(in.index);
            emit(x_br_table, start, in.targets.size());
            set_unreachable();
            return;
        }
        case return_:
            emit(x_return);
            set_unreachable();
            return;
        case call:
        {
            const FuncType& type = module_.function_type(in.index);
            pop(static_cast<uint32_t>(type.params.size()));
            push(static_cast<uint32_t>(type.results.size()));
            const uint32_t imported = module_.imported_function_count();
            if (in.index < imported)
                emit(x_call_host, in.index, call_shape(type));
            else
                emit(x_call, in.index - imported, call_shape(type));
            return;
        }
        case call_indirect:
        {
            const FuncType& type = module_.types.at(in.index);
            pop();
            pop(static_cast<uint32_t>(type.params.size()));
            push(static_cast<uint32_t>(type.results.size()));
            emit(x_call_indirect, type_sig_[in.index], call_shape(type));
            return;
        }
        case drop:
            pop();
            emit(byte);
            return;
        case select:
            pop(3);
            push();
            emit(byte);
            return;
        case local_get:
            push();
            emit(byte, in.index);
            return;
        case local_set:
            pop();
            if (!fuse_store_local(Dest::set, in.index))
                emit(byte, in.index);
            return;
        case local_tee:
            if (!fuse_store_local(Dest::tee, in.index))
                emit(byte, in.index);
            return;
        case global_get:
            push();
            emit(byte, in.index);
            return;
        case global_set:
            pop();
            emit(byte, in.index);
            return;
        case memory_size:
            push();
            emit(byte);
            return;
        case memory_grow:
            emit(byte);
            return;
        case i32_const:
        case i64_const:
        case f32_const:
        case f64_const:
            push();
            emit(byte, 0, in.value);
            return;
        default:
            break;
        }

        if (byte >= static_cast<uint8_t>(i32_load) && byte <= static_cast<uint8_t>(i64_store32))
        {
            const MemorySig sig = memory_sig(in.op);
            pop(sig.is_store ? 2 : 1);
            if (!sig.is_store)
                push();
            Op* prev = sig.is_store ? nullptr : last_fusable();
            if (prev != nullptr && prev->code == static_cast<uint8_t>(local_get))
                *prev = {static_cast<uint16_t>(load_local_base + (byte - 0x28)), in.offset, prev->a};
            else
                emit(byte, in.offset);
            return;
        }
        if (const auto sig = numeric_sig(byte))
        {
            pop(sig->arity);
            push();
            if (fusable_i32(byte))
                emit_i32_binop(byte);
            else
                emit(byte);
            return;
        }
        throw std::logic_error{"cannot lower opcode"};
    }

    const ModuleIR& module_;
    std::span<const uint32_t> type_sig_;
    CompiledFunction out_;
    std::vector<Ctrl> ctrls_;
    uint32_t height_ = 0;
    uint32_t fence_ = 0;
};

}  // namespace

CompiledCode compile(const ModuleIR& module, std::span<const uint32_t> type_sig)
{
    CompiledCode code;
    FunctionCompiler fc{module, type_sig};
    code.functions.reserve(module.functions.size());
    for (const FuncDef& def : module.functions)
        code.functions.push_back(fc.run(def));
    bind_handlers(code);
    return code;
}

}  // namespace gobi::detail
