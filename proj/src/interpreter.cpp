// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "code.hpp"
#include "fused.hpp"
#include "gobi/errors.hpp"
#include "gobi/instance.hpp"
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>

static_assert(std::endian::native == std::endian::little, "linear memory access assumes a little-endian host");

namespace gobi::detail {

void fused_trap(bool overflow)
{
    if (overflow)
        throw TrapException{TrapKind::IntegerOverflow, "integer overflow"};
    throw TrapException{TrapKind::DivideByZero, "integer divide by zero"};
}

namespace {

[[noreturn, gnu::cold]] void trap(TrapKind kind, const char* detail)
{
    throw TrapException{kind, detail};
}

template <typename T>
inline T load(const uint8_t* p) noexcept
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

template <typename T>
inline void store(uint8_t* p, T v) noexcept
{
    std::memcpy(p, &v, sizeof(T));
}

inline float as_f32(uint64_t slot) noexcept
{
    return std::bit_cast<float>(static_cast<uint32_t>(slot));
}

inline double as_f64(uint64_t slot) noexcept
{
    return std::bit_cast<double>(slot);
}

inline uint64_t f32_slot(float v, bool canon) noexcept
{
    if (canon && std::isnan(v))
        return canonical_nan32;
    return std::bit_cast<uint32_t>(v);
}

inline uint64_t f64_slot(double v, bool canon) noexcept
{
    if (canon && std::isnan(v))
        return canonical_nan64;
    return std::bit_cast<uint64_t>(v);
}

template <typename F>
F wasm_min(F a, F b) noexcept
{
    if (std::isnan(a) || std::isnan(b))
        return a + b;
    if (a == b)
        return std::signbit(a) ? a : b;
    return a < b ? a : b;
}

template <typename F>
F wasm_max(F a, F b) noexcept
{
    if (std::isnan(a) || std::isnan(b))
        return a + b;
    if (a == b)
        return std::signbit(a) ? b : a;
    return a > b ? a : b;
}

// Truncation is valid iff lo < x < hi; both bounds are exact doubles.
template <typename I>
I trunc_checked(double x, double lo, double hi)
{
    if (std::isnan(x))
        trap(TrapKind::IntegerOverflow, "invalid conversion to integer");
    if (!(x > lo && x < hi))
        trap(TrapKind::IntegerOverflow, "integer overflow");
    return static_cast<I>(x);
}

constexpr double i32_lo = -2147483649.0;
constexpr double i32_hi = 2147483648.0;
constexpr double u32_hi = 4294967296.0;
constexpr double i64_hi = 9223372036854775808.0;
constexpr double u64_hi = 18446744073709551616.0;

inline int64_t trunc_i64(double x)
{
    if (std::isnan(x))
        trap(TrapKind::IntegerOverflow, "invalid conversion to integer");
    if (!(x >= -i64_hi && x < i64_hi))
        trap(TrapKind::IntegerOverflow, "integer overflow");
    return static_cast<int64_t>(x);
}

}  // namespace

class Executor
{
public:
    template <BoundsStrategy S, bool Metered>
    static void exec(Instance& inst, uint32_t func, uint64_t* fp);

    static void call_host(Instance& inst, uint32_t host_index, uint64_t* fp);

    template <BoundsStrategy S, bool Metered>
    static void call_any(Instance& inst, uint32_t func_index, uint64_t* fp)
    {
        const uint32_t imported = inst.module_->imported_function_count();
        if (func_index < imported)
            call_host(inst, func_index, fp);
        else
            exec<S, Metered>(inst, func_index - imported, fp);
    }
};

void Executor::call_host(Instance& inst, uint32_t host_index, uint64_t* fp)
{
    const HostFunc& hf = inst.host_funcs_[host_index];
    const FuncType& type = hf.type;
    std::vector<Value> args;
    args.reserve(type.params.size());
    for (size_t i = 0; i < type.params.size(); ++i)
        args.push_back(Value::from_bits(type.params[i], fp[i]));

    if (++inst.depth_ > inst.config_.max_call_depth)
        trap(TrapKind::CallStackExhausted, "call depth exceeded");
    inst.stack_top_ = fp + std::max(type.params.size(), type.results.size());

    std::vector<Value> results;
    try
    {
        results = hf.fn(inst, args);
    }
    catch (const TrapException&)
    {
        throw;
    }
    catch (const InternalError&)
    {
        throw;
    }
    catch (const std::exception& e)
    {
        throw TrapException{TrapKind::HostError, e.what()};
    }
    --inst.depth_;

    bool ok = results.size() == type.results.size();
    for (size_t i = 0; ok && i < results.size(); ++i)
        ok = results[i].kind() == type.results[i];
    if (!ok)
        trap(TrapKind::HostError, "host function returned mismatched results");
    for (size_t i = 0; i < results.size(); ++i)
        fp[i] = results[i].bits();
}

// Every handler label of Executor::exec with the internal code it runs.
#define PLAIN_HANDLERS(X)                                                                                        \
    X(op_0x00, 0x00) X(op_0x1a, 0x1a) X(op_0x1b, 0x1b) X(op_0x20, 0x20) X(op_0x21, 0x21) X(op_0x22, 0x22)        \
    X(op_0x23, 0x23) X(op_0x24, 0x24) X(op_0x28, 0x28) X(op_0x29, 0x29) X(op_0x2a, 0x2a) X(op_0x2b, 0x2b)        \
    X(op_0x2c, 0x2c) X(op_0x2d, 0x2d) X(op_0x2e, 0x2e) X(op_0x2f, 0x2f) X(op_0x30, 0x30) X(op_0x31, 0x31)        \
    X(op_0x32, 0x32) X(op_0x33, 0x33) X(op_0x34, 0x34) X(op_0x35, 0x35) X(op_0x36, 0x36) X(op_0x37, 0x37)        \
    X(op_0x38, 0x38) X(op_0x39, 0x39) X(op_0x3a, 0x3a) X(op_0x3b, 0x3b) X(op_0x3c, 0x3c) X(op_0x3d, 0x3d)        \
    X(op_0x3e, 0x3e) X(op_0x3f, 0x3f) X(op_0x40, 0x40) X(op_0x41, 0x41) X(op_0x42, 0x42) X(op_0x43, 0x43)        \
    X(op_0x44, 0x44) X(op_0x45, 0x45) X(op_0x46, 0x46) X(op_0x47, 0x47) X(op_0x48, 0x48) X(op_0x49, 0x49)        \
    X(op_0x4a, 0x4a) X(op_0x4b, 0x4b) X(op_0x4c, 0x4c) X(op_0x4d, 0x4d) X(op_0x4e, 0x4e) X(op_0x4f, 0x4f)        \
    X(op_0x50, 0x50) X(op_0x51, 0x51) X(op_0x52, 0x52) X(op_0x53, 0x53) X(op_0x54, 0x54) X(op_0x55, 0x55)        \
    X(op_0x56, 0x56) X(op_0x57, 0x57) X(op_0x58, 0x58) X(op_0x59, 0x59) X(op_0x5a, 0x5a) X(op_0x5b, 0x5b)        \
    X(op_0x5c, 0x5c) X(op_0x5d, 0x5d) X(op_0x5e, 0x5e) X(op_0x5f, 0x5f) X(op_0x60, 0x60) X(op_0x61, 0x61)        \
    X(op_0x62, 0x62) X(op_0x63, 0x63) X(op_0x64, 0x64) X(op_0x65, 0x65) X(op_0x66, 0x66) X(op_0x67, 0x67)        \
    X(op_0x68, 0x68) X(op_0x69, 0x69) X(op_0x6a, 0x6a) X(op_0x6b, 0x6b) X(op_0x6c, 0x6c) X(op_0x6d, 0x6d)        \
    X(op_0x6e, 0x6e) X(op_0x6f, 0x6f) X(op_0x70, 0x70) X(op_0x71, 0x71) X(op_0x72, 0x72) X(op_0x73, 0x73)        \
    X(op_0x74, 0x74) X(op_0x75, 0x75) X(op_0x76, 0x76) X(op_0x77, 0x77) X(op_0x78, 0x78) X(op_0x79, 0x79)        \
    X(op_0x7a, 0x7a) X(op_0x7b, 0x7b) X(op_0x7c, 0x7c) X(op_0x7d, 0x7d) X(op_0x7e, 0x7e) X(op_0x7f, 0x7f)        \
    X(op_0x80, 0x80) X(op_0x81, 0x81) X(op_0x82, 0x82) X(op_0x83, 0x83) X(op_0x84, 0x84) X(op_0x85, 0x85)        \
    X(op_0x86, 0x86) X(op_0x87, 0x87) X(op_0x88, 0x88) X(op_0x89, 0x89) X(op_0x8a, 0x8a) X(op_0x8b, 0x8b)        \
    X(op_0x8c, 0x8c) X(op_0x8d, 0x8d) X(op_0x8e, 0x8e) X(op_0x8f, 0x8f) X(op_0x90, 0x90) X(op_0x91, 0x91)        \
    X(op_0x92, 0x92) X(op_0x93, 0x93) X(op_0x94, 0x94) X(op_0x95, 0x95) X(op_0x96, 0x96) X(op_0x97, 0x97)        \
    X(op_0x98, 0x98) X(op_0x99, 0x99) X(op_0x9a, 0x9a) X(op_0x9b, 0x9b) X(op_0x9c, 0x9c) X(op_0x9d, 0x9d)        \
    X(op_0x9e, 0x9e) X(op_0x9f, 0x9f) X(op_0xa0, 0xa0) X(op_0xa1, 0xa1) X(op_0xa2, 0xa2) X(op_0xa3, 0xa3)        \
    X(op_0xa4, 0xa4) X(op_0xa5, 0xa5) X(op_0xa6, 0xa6) X(op_0xa7, 0xa7) X(op_0xa8, 0xa8) X(op_0xa9, 0xa9)        \
    X(op_0xaa, 0xaa) X(op_0xab, 0xab) X(op_0xac, 0xac) X(op_0xad, 0xad) X(op_0xae, 0xae) X(op_0xaf, 0xaf)        \
    X(op_0xb0, 0xb0) X(op_0xb1, 0xb1) X(op_0xb2, 0xb2) X(op_0xb3, 0xb3) X(op_0xb4, 0xb4) X(op_0xb5, 0xb5)        \
    X(op_0xb6, 0xb6) X(op_0xb7, 0xb7) X(op_0xb8, 0xb8) X(op_0xb9, 0xb9) X(op_0xba, 0xba) X(op_0xbb, 0xbb)        \
    X(op_0xbc, 0xbc) X(op_0xbd, 0xbd) X(op_0xbe, 0xbe) X(op_0xbf, 0xbf) X(op_x_jump, x_jump)                     \
    X(op_x_jump_if, x_jump_if) X(op_x_jump_unless, x_jump_unless) X(op_x_br, x_br) X(op_x_br_if, x_br_if)        \
    X(op_x_br_table, x_br_table) X(op_x_return, x_return) X(op_x_end, x_end) X(op_x_call, x_call)                \
    X(op_x_call_host, x_call_host) X(op_x_call_indirect, x_call_indirect) X(op_ll_0x28, load_local_base + 0x00)  \
    X(op_ll_0x29, load_local_base + 0x01) X(op_ll_0x2a, load_local_base + 0x02)                                  \
    X(op_ll_0x2b, load_local_base + 0x03) X(op_ll_0x2c, load_local_base + 0x04)                                  \
    X(op_ll_0x2d, load_local_base + 0x05) X(op_ll_0x2e, load_local_base + 0x06)                                  \
    X(op_ll_0x2f, load_local_base + 0x07) X(op_ll_0x30, load_local_base + 0x08)                                  \
    X(op_ll_0x31, load_local_base + 0x09) X(op_ll_0x32, load_local_base + 0x0a)                                  \
    X(op_ll_0x33, load_local_base + 0x0b) X(op_ll_0x34, load_local_base + 0x0c)                                  \
    X(op_ll_0x35, load_local_base + 0x0d)
#define HANDLER_CODE(label, code) code,
#define FUSED_CODE(S, D, O) fused_code(Shape::S, Dest::D, O),
#define FUSED_ADDRESS(S, D, O) &&op_f_##S##_##D##_##O,

constexpr uint16_t handler_codes[] = {PLAIN_HANDLERS(HANDLER_CODE) GOBI_FUSED_ALL(FUSED_CODE)};
constexpr size_t handler_count = std::size(handler_codes) + 1;  // slot 0 is the invalid-code handler

constexpr std::array<uint16_t, load_local_end> slot_of_code = [] {
    std::array<uint16_t, load_local_end> slots{};
    for (size_t i = 0; i < std::size(handler_codes); ++i)
        slots[handler_codes[i]] = static_cast<uint16_t>(i + 1);
    return slots;
}();

#define BIN_I32(expr)                                   \
    {                                                   \
        const uint32_t b = static_cast<uint32_t>(sp[-1]); \
        const uint32_t a = static_cast<uint32_t>(sp[-2]); \
        --sp;                                           \
        sp[-1] = static_cast<uint32_t>(expr);           \
        NEXT;                                          \
    }
#define BIN_I64(expr)            \
    {                            \
        const uint64_t b = sp[-1]; \
        const uint64_t a = sp[-2]; \
        --sp;                    \
        sp[-1] = static_cast<uint64_t>(expr); \
        NEXT;                   \
    }
#define UN_I32(expr)                                    \
    {                                                   \
        const uint32_t a = static_cast<uint32_t>(sp[-1]); \
        sp[-1] = static_cast<uint32_t>(expr);           \
        NEXT;                                          \
    }
#define UN_I64(expr)                          \
    {                                         \
        const uint64_t a = sp[-1];            \
        sp[-1] = static_cast<uint64_t>(expr); \
        NEXT;                                \
    }
#define CMP_F32(expr)                      \
    {                                      \
        const float b = as_f32(sp[-1]);    \
        const float a = as_f32(sp[-2]);    \
        --sp;                              \
        sp[-1] = (expr) ? 1 : 0;           \
        NEXT;                             \
    }
#define CMP_F64(expr)                      \
    {                                      \
        const double b = as_f64(sp[-1]);   \
        const double a = as_f64(sp[-2]);   \
        --sp;                              \
        sp[-1] = (expr) ? 1 : 0;           \
        NEXT;                             \
    }
#define BIN_F32(expr)                      \
    {                                      \
        const float b = as_f32(sp[-1]);    \
        const float a = as_f32(sp[-2]);    \
        --sp;                              \
        sp[-1] = f32_slot((expr), canon);  \
        NEXT;                             \
    }
#define BIN_F64(expr)                      \
    {                                      \
        const double b = as_f64(sp[-1]);   \
        const double a = as_f64(sp[-2]);   \
        --sp;                              \
        sp[-1] = f64_slot((expr), canon);  \
        NEXT;                             \
    }
#define UN_F32(expr)                       \
    {                                      \
        const float a = as_f32(sp[-1]);    \
        sp[-1] = f32_slot((expr), canon);  \
        NEXT;                             \
    }
#define UN_F64(expr)                       \
    {                                      \
        const double a = as_f64(sp[-1]);   \
        sp[-1] = f64_slot((expr), canon);  \
        NEXT;                             \
    }
#define HANDLER(label) label
#define HANDLER_ADDRESS(label, code) &&label,
#define NEXT                                                        \
    do                                                              \
    {                                                               \
        op = ip++;                                                  \
        if constexpr (Metered)                                      \
        {                                                           \
            if (inst.fuel_ == 0) [[unlikely]]                       \
                trap(TrapKind::FuelExhausted, "fuel exhausted");    \
            --inst.fuel_;                                           \
        }                                                           \
        goto* handlers[op->code];                                   \
    } while (0)
#define ADDRESS(width)                                                                                   \
    uint64_t ea = uint64_t{static_cast<uint32_t>(base)} + op->a;                                        \
    if (!confine<S>(mem_len, mem_cap, ea, (width))) [[unlikely]]                                         \
        trap(TrapKind::OutOfBoundsMemory, "out of bounds memory access");                                \
    uint8_t* const ptr = mem + ea;
#define LOAD(T, width, convert)          \
    {                                    \
        const uint64_t base = sp[-1];    \
        ADDRESS(width)                   \
        const T v = load<T>(ptr);        \
        sp[-1] = (convert);              \
        NEXT;                           \
    }
#define STORE(T, width)                          \
    {                                            \
        const uint64_t value = sp[-1];           \
        const uint64_t base = sp[-2];            \
        sp -= 2;                                 \
        ADDRESS(width)                           \
        store<T>(ptr, static_cast<T>(value));    \
        NEXT;                                   \
    }

template <BoundsStrategy S, bool Metered>
void Executor::exec(Instance& inst, uint32_t func, uint64_t* fp)
{
    const CompiledFunction& fn = inst.code_->functions[func];
    if (++inst.depth_ > inst.config_.max_call_depth)
        trap(TrapKind::CallStackExhausted, "call depth exceeded");
    uint64_t* const ob = fp + fn.num_params + fn.num_locals;
    if (ob + fn.max_height > inst.stack_end_)
        trap(TrapKind::CallStackExhausted, "operand stack exhausted");
    std::fill(fp + fn.num_params, ob, uint64_t{0});

    uint64_t* sp = ob;
    const Op* const code = fn.code.data();
    const Op* ip = code;
    uint64_t* const globals = inst.globals_.data();
    const bool canon = inst.config_.deterministic;

    uint8_t* mem = nullptr;
    uint64_t mem_len = 0;
    uint64_t mem_cap = 0;
    auto reload = [&]() noexcept {
        if (inst.memory_)
        {
            mem = inst.memory_->data();
            mem_len = inst.memory_->size_bytes();
            mem_cap = inst.memory_->capacity();
        }
    };
    reload();

    static const void* const handlers[] = {&&op_invalid, PLAIN_HANDLERS(HANDLER_ADDRESS) GOBI_FUSED_ALL(FUSED_ADDRESS)};
    static_assert(std::size(handlers) == handler_count);
    const Op* op;
    NEXT;

    {
        HANDLER(op_0x00):
            trap(TrapKind::Unreachable, "unreachable executed");

        HANDLER(op_x_jump):
            ip = code + op->a;
            NEXT;
        HANDLER(op_x_jump_if):
            if (static_cast<uint32_t>(*--sp) != 0)
                ip = code + op->a;
            NEXT;
        HANDLER(op_x_jump_unless):
            if (static_cast<uint32_t>(*--sp) == 0)
                ip = code + op->a;
            NEXT;
        HANDLER(op_x_br_if):
            if (static_cast<uint32_t>(*--sp) == 0)
                NEXT;
            goto op_x_br;
        HANDLER(op_x_br):
        {
            const auto arity = static_cast<uint32_t>(op->b >> 32);
            uint64_t* const dst = ob + static_cast<uint32_t>(op->b);
            if (arity != 0)
                *dst = sp[-1];
            sp = dst + arity;
            ip = code + op->a;
            NEXT;
        }
        HANDLER(op_x_br_table):
        {
            const auto i = static_cast<uint32_t>(*--sp);
            const BrTarget& t = fn.targets[op->a + std::min<uint64_t>(i, op->b)];
            uint64_t* const dst = ob + t.height;
            if (t.arity != 0)
                *dst = sp[-1];
            sp = dst + t.arity;
            ip = code + t.pc;
            NEXT;
        }
        HANDLER(op_x_end):
            if (sp != ob + fn.num_results) [[unlikely]]
                throw InternalError{"operand stack height mismatch at function end"};
            goto op_x_return;
        HANDLER(op_x_return):
            std::copy(sp - fn.num_results, sp, fp);
            --inst.depth_;
            return;

        HANDLER(op_x_call):
        {
            uint64_t* const cfp = sp - static_cast<uint32_t>(op->b);
            exec<S, Metered>(inst, op->a, cfp);
            sp = cfp + static_cast<uint32_t>(op->b >> 32);
            reload();
            NEXT;
        }
        HANDLER(op_x_call_host):
        {
            uint64_t* const cfp = sp - static_cast<uint32_t>(op->b);
            call_host(inst, op->a, cfp);
            sp = cfp + static_cast<uint32_t>(op->b >> 32);
            reload();
            NEXT;
        }
        HANDLER(op_x_call_indirect):
        {
            const auto slot = static_cast<uint32_t>(*--sp);
            if (slot >= inst.table_.size())
                trap(TrapKind::OutOfBoundsTable, "undefined table element");
            const TableEntry e = inst.table_[slot];
            if (e.kind == TableEntry::Kind::empty)
                trap(TrapKind::UninitializedTableElement, "uninitialized table element");
            if (e.sig_id != op->a)
                trap(TrapKind::IndirectCallTypeMismatch, "indirect call type mismatch");
            const auto np = static_cast<uint32_t>(op->b);
            const auto nr = static_cast<uint32_t>(op->b >> 32);
            uint64_t* const cfp = sp - np;
            if (e.kind == TableEntry::Kind::host)
                call_host(inst, e.index, cfp);
            else
                call_any<S, Metered>(inst, e.index, cfp);
            sp = cfp + nr;
            reload();
            NEXT;
        }

        HANDLER(op_0x1a):  // drop
            --sp;
            NEXT;
        HANDLER(op_0x1b):  // select
        {
            const auto c = static_cast<uint32_t>(sp[-1]);
            const uint64_t b = sp[-2];
            sp -= 2;
            if (c == 0)
                sp[-1] = b;
            NEXT;
        }

        HANDLER(op_0x20):
            *sp++ = fp[op->a];
            NEXT;
        HANDLER(op_0x21):
            fp[op->a] = *--sp;
            NEXT;
        HANDLER(op_0x22):
            fp[op->a] = sp[-1];
            NEXT;
        HANDLER(op_0x23):
            *sp++ = globals[op->a];
            NEXT;
        HANDLER(op_0x24):
            globals[op->a] = *--sp;
            NEXT;

        HANDLER(op_0x28): LOAD(uint32_t, 4, v)
        HANDLER(op_0x29): LOAD(uint64_t, 8, v)
        HANDLER(op_0x2a): LOAD(uint32_t, 4, v)
        HANDLER(op_0x2b): LOAD(uint64_t, 8, v)
        HANDLER(op_0x2c): LOAD(int8_t, 1, static_cast<uint32_t>(int32_t{v}))
        HANDLER(op_0x2d): LOAD(uint8_t, 1, v)
        HANDLER(op_0x2e): LOAD(int16_t, 2, static_cast<uint32_t>(int32_t{v}))
        HANDLER(op_0x2f): LOAD(uint16_t, 2, v)
        HANDLER(op_0x30): LOAD(int8_t, 1, static_cast<uint64_t>(int64_t{v}))
        HANDLER(op_0x31): LOAD(uint8_t, 1, v)
        HANDLER(op_0x32): LOAD(int16_t, 2, static_cast<uint64_t>(int64_t{v}))
        HANDLER(op_0x33): LOAD(uint16_t, 2, v)
        HANDLER(op_0x34): LOAD(int32_t, 4, static_cast<uint64_t>(int64_t{v}))
        HANDLER(op_0x35): LOAD(uint32_t, 4, v)
        HANDLER(op_0x36): STORE(uint32_t, 4)
        HANDLER(op_0x37): STORE(uint64_t, 8)
        HANDLER(op_0x38): STORE(uint32_t, 4)
        HANDLER(op_0x39): STORE(uint64_t, 8)
        HANDLER(op_0x3a): STORE(uint8_t, 1)
        HANDLER(op_0x3b): STORE(uint16_t, 2)
        HANDLER(op_0x3c): STORE(uint8_t, 1)
        HANDLER(op_0x3d): STORE(uint16_t, 2)
        HANDLER(op_0x3e): STORE(uint32_t, 4)
        HANDLER(op_0x3f):
            *sp++ = mem_len / page_size;
            NEXT;
        HANDLER(op_0x40):
            sp[-1] = inst.memory_->grow(static_cast<uint32_t>(sp[-1]));
            reload();
            NEXT;

        HANDLER(op_0x41):
        HANDLER(op_0x42):
        HANDLER(op_0x43):
        HANDLER(op_0x44):
            *sp++ = op->b;
            NEXT;

        HANDLER(op_0x45): UN_I32(a == 0)
        HANDLER(op_0x46): BIN_I32(a == b)
        HANDLER(op_0x47): BIN_I32(a != b)
        HANDLER(op_0x48): BIN_I32(int32_t(a) < int32_t(b))
        HANDLER(op_0x49): BIN_I32(a < b)
        HANDLER(op_0x4a): BIN_I32(int32_t(a) > int32_t(b))
        HANDLER(op_0x4b): BIN_I32(a > b)
        HANDLER(op_0x4c): BIN_I32(int32_t(a) <= int32_t(b))
        HANDLER(op_0x4d): BIN_I32(a <= b)
        HANDLER(op_0x4e): BIN_I32(int32_t(a) >= int32_t(b))
        HANDLER(op_0x4f): BIN_I32(a >= b)

        HANDLER(op_0x50): UN_I64(a == 0)
        HANDLER(op_0x51): BIN_I64(a == b)
        HANDLER(op_0x52): BIN_I64(a != b)
        HANDLER(op_0x53): BIN_I64(int64_t(a) < int64_t(b))
        HANDLER(op_0x54): BIN_I64(a < b)
        HANDLER(op_0x55): BIN_I64(int64_t(a) > int64_t(b))
        HANDLER(op_0x56): BIN_I64(a > b)
        HANDLER(op_0x57): BIN_I64(int64_t(a) <= int64_t(b))
        HANDLER(op_0x58): BIN_I64(a <= b)
        HANDLER(op_0x59): BIN_I64(int64_t(a) >= int64_t(b))
        HANDLER(op_0x5a): BIN_I64(a >= b)

        HANDLER(op_0x5b): CMP_F32(a == b)
        HANDLER(op_0x5c): CMP_F32(a != b)
        HANDLER(op_0x5d): CMP_F32(a < b)
        HANDLER(op_0x5e): CMP_F32(a > b)
        HANDLER(op_0x5f): CMP_F32(a <= b)
        HANDLER(op_0x60): CMP_F32(a >= b)
        HANDLER(op_0x61): CMP_F64(a == b)
        HANDLER(op_0x62): CMP_F64(a != b)
        HANDLER(op_0x63): CMP_F64(a < b)
        HANDLER(op_0x64): CMP_F64(a > b)
        HANDLER(op_0x65): CMP_F64(a <= b)
        HANDLER(op_0x66): CMP_F64(a >= b)

        HANDLER(op_0x67): UN_I32(std::countl_zero(a))
        HANDLER(op_0x68): UN_I32(std::countr_zero(a))
        HANDLER(op_0x69): UN_I32(std::popcount(a))
        HANDLER(op_0x6a): BIN_I32(a + b)
        HANDLER(op_0x6b): BIN_I32(a - b)
        HANDLER(op_0x6c): BIN_I32(a * b)
        HANDLER(op_0x6d):
        {
            const auto b = static_cast<int32_t>(sp[-1]);
            const auto a = static_cast<int32_t>(sp[-2]);
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            if (a == INT32_MIN && b == -1)
                trap(TrapKind::IntegerOverflow, "integer overflow");
            --sp;
            sp[-1] = static_cast<uint32_t>(a / b);
            NEXT;
        }
        HANDLER(op_0x6e):
        {
            const auto b = static_cast<uint32_t>(sp[-1]);
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            --sp;
            sp[-1] = static_cast<uint32_t>(sp[-1]) / b;
            NEXT;
        }
        HANDLER(op_0x6f):
        {
            const auto b = static_cast<int32_t>(sp[-1]);
            const auto a = static_cast<int32_t>(sp[-2]);
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            --sp;
            sp[-1] = b == -1 ? 0 : static_cast<uint32_t>(a % b);
            NEXT;
        }
        HANDLER(op_0x70):
        {
            const auto b = static_cast<uint32_t>(sp[-1]);
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            --sp;
            sp[-1] = static_cast<uint32_t>(sp[-1]) % b;
            NEXT;
        }
        HANDLER(op_0x71): BIN_I32(a & b)
        HANDLER(op_0x72): BIN_I32(a | b)
        HANDLER(op_0x73): BIN_I32(a ^ b)
        HANDLER(op_0x74): BIN_I32(a << (b & 31))
        HANDLER(op_0x75): BIN_I32(int32_t(a) >> (b & 31))
        HANDLER(op_0x76): BIN_I32(a >> (b & 31))
        HANDLER(op_0x77): BIN_I32(std::rotl(a, static_cast<int>(b & 31)))
        HANDLER(op_0x78): BIN_I32(std::rotr(a, static_cast<int>(b & 31)))

        HANDLER(op_0x79): UN_I64(std::countl_zero(a))
        HANDLER(op_0x7a): UN_I64(std::countr_zero(a))
        HANDLER(op_0x7b): UN_I64(std::popcount(a))
        HANDLER(op_0x7c): BIN_I64(a + b)
        HANDLER(op_0x7d): BIN_I64(a - b)
        HANDLER(op_0x7e): BIN_I64(a * b)
        HANDLER(op_0x7f):
        {
            const auto b = static_cast<int64_t>(sp[-1]);
            const auto a = static_cast<int64_t>(sp[-2]);
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            if (a == INT64_MIN && b == -1)
                trap(TrapKind::IntegerOverflow, "integer overflow");
            --sp;
            sp[-1] = static_cast<uint64_t>(a / b);
            NEXT;
        }
        HANDLER(op_0x80):
        {
            const uint64_t b = sp[-1];
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            --sp;
            sp[-1] /= b;
            NEXT;
        }
        HANDLER(op_0x81):
        {
            const auto b = static_cast<int64_t>(sp[-1]);
            const auto a = static_cast<int64_t>(sp[-2]);
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            --sp;
            sp[-1] = b == -1 ? 0 : static_cast<uint64_t>(a % b);
            NEXT;
        }
        HANDLER(op_0x82):
        {
            const uint64_t b = sp[-1];
            if (b == 0)
                trap(TrapKind::DivideByZero, "integer divide by zero");
            --sp;
            sp[-1] %= b;
            NEXT;
        }
        HANDLER(op_0x83): BIN_I64(a & b)
        HANDLER(op_0x84): BIN_I64(a | b)
        HANDLER(op_0x85): BIN_I64(a ^ b)
        HANDLER(op_0x86): BIN_I64(a << (b & 63))
        HANDLER(op_0x87): BIN_I64(int64_t(a) >> (b & 63))
        HANDLER(op_0x88): BIN_I64(a >> (b & 63))
        HANDLER(op_0x89): BIN_I64(std::rotl(a, static_cast<int>(b & 63)))
        HANDLER(op_0x8a): BIN_I64(std::rotr(a, static_cast<int>(b & 63)))

        HANDLER(op_0x8b):
            sp[-1] &= 0x7fffffffu;
            NEXT;
        HANDLER(op_0x8c):
            sp[-1] ^= 0x80000000u;
            NEXT;
        HANDLER(op_0x8d): UN_F32(std::ceil(a))
        HANDLER(op_0x8e): UN_F32(std::floor(a))
        HANDLER(op_0x8f): UN_F32(std::trunc(a))
        HANDLER(op_0x90): UN_F32(std::nearbyint(a))
        HANDLER(op_0x91): UN_F32(std::sqrt(a))
        HANDLER(op_0x92): BIN_F32(a + b)
        HANDLER(op_0x93): BIN_F32(a - b)
        HANDLER(op_0x94): BIN_F32(a * b)
        HANDLER(op_0x95): BIN_F32(a / b)
        HANDLER(op_0x96): BIN_F32(wasm_min(a, b))
        HANDLER(op_0x97): BIN_F32(wasm_max(a, b))
        HANDLER(op_0x98):
        {
            const uint64_t b = sp[-1];
            --sp;
            sp[-1] = (sp[-1] & 0x7fffffffu) | (b & 0x80000000u);
            NEXT;
        }

        HANDLER(op_0x99):
            sp[-1] &= 0x7fffffffffffffffull;
            NEXT;
        HANDLER(op_0x9a):
            sp[-1] ^= 0x8000000000000000ull;
            NEXT;
        HANDLER(op_0x9b): UN_F64(std::ceil(a))
        HANDLER(op_0x9c): UN_F64(std::floor(a))
        HANDLER(op_0x9d): UN_F64(std::trunc(a))
        HANDLER(op_0x9e): UN_F64(std::nearbyint(a))
        HANDLER(op_0x9f): UN_F64(std::sqrt(a))
        HANDLER(op_0xa0): BIN_F64(a + b)
        HANDLER(op_0xa1): BIN_F64(a - b)
        HANDLER(op_0xa2): BIN_F64(a * b)
        HANDLER(op_0xa3): BIN_F64(a / b)
        HANDLER(op_0xa4): BIN_F64(wasm_min(a, b))
        HANDLER(op_0xa5): BIN_F64(wasm_max(a, b))
        HANDLER(op_0xa6):
        {
            const uint64_t b = sp[-1];
            --sp;
            sp[-1] = (sp[-1] & 0x7fffffffffffffffull) | (b & 0x8000000000000000ull);
            NEXT;
        }

        HANDLER(op_0xa7):
            sp[-1] = static_cast<uint32_t>(sp[-1]);
            NEXT;
        HANDLER(op_0xa8):
            sp[-1] = static_cast<uint32_t>(trunc_checked<int32_t>(as_f32(sp[-1]), i32_lo, i32_hi));
            NEXT;
        HANDLER(op_0xa9):
            sp[-1] = trunc_checked<uint32_t>(as_f32(sp[-1]), -1.0, u32_hi);
            NEXT;
        HANDLER(op_0xaa):
            sp[-1] = static_cast<uint32_t>(trunc_checked<int32_t>(as_f64(sp[-1]), i32_lo, i32_hi));
            NEXT;
        HANDLER(op_0xab):
            sp[-1] = trunc_checked<uint32_t>(as_f64(sp[-1]), -1.0, u32_hi);
            NEXT;
        HANDLER(op_0xac):
            sp[-1] = static_cast<uint64_t>(int64_t{static_cast<int32_t>(sp[-1])});
            NEXT;
        HANDLER(op_0xad):
            sp[-1] = static_cast<uint32_t>(sp[-1]);
            NEXT;
        HANDLER(op_0xae):
            sp[-1] = static_cast<uint64_t>(trunc_i64(as_f32(sp[-1])));
            NEXT;
        HANDLER(op_0xaf):
            sp[-1] = trunc_checked<uint64_t>(as_f32(sp[-1]), -1.0, u64_hi);
            NEXT;
        HANDLER(op_0xb0):
            sp[-1] = static_cast<uint64_t>(trunc_i64(as_f64(sp[-1])));
            NEXT;
        HANDLER(op_0xb1):
            sp[-1] = trunc_checked<uint64_t>(as_f64(sp[-1]), -1.0, u64_hi);
            NEXT;
        HANDLER(op_0xb2):
            sp[-1] = f32_slot(static_cast<float>(static_cast<int32_t>(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xb3):
            sp[-1] = f32_slot(static_cast<float>(static_cast<uint32_t>(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xb4):
            sp[-1] = f32_slot(static_cast<float>(static_cast<int64_t>(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xb5):
            sp[-1] = f32_slot(static_cast<float>(sp[-1]), canon);
            NEXT;
        HANDLER(op_0xb6):
            sp[-1] = f32_slot(static_cast<float>(as_f64(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xb7):
            sp[-1] = f64_slot(static_cast<double>(static_cast<int32_t>(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xb8):
            sp[-1] = f64_slot(static_cast<double>(static_cast<uint32_t>(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xb9):
            sp[-1] = f64_slot(static_cast<double>(static_cast<int64_t>(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xba):
            sp[-1] = f64_slot(static_cast<double>(sp[-1]), canon);
            NEXT;
        HANDLER(op_0xbb):
            sp[-1] = f64_slot(static_cast<double>(as_f32(sp[-1])), canon);
            NEXT;
        HANDLER(op_0xbc):
        HANDLER(op_0xbd):
        HANDLER(op_0xbe):
        HANDLER(op_0xbf):
            NEXT;

#define FUSED_CASE(S, D, O)                                     \
    HANDLER(op_f_##S##_##D##_##O):                              \
        run_fused<Shape::S, Dest::D, O>(*op, sp, fp, ip, code);  \
        NEXT;
            GOBI_FUSED_ALL(FUSED_CASE)
#undef FUSED_CASE

#define LOAD_LOCAL(opc, T, width, convert)           \
    HANDLER(op_ll_##opc):                            \
    {                                                \
        const uint64_t base = fp[op->b];              \
        ADDRESS(width)                               \
        const T v = load<T>(ptr);                    \
        *sp++ = (convert);                           \
        NEXT;                                       \
    }
        LOAD_LOCAL(0x28, uint32_t, 4, v)
        LOAD_LOCAL(0x29, uint64_t, 8, v)
        LOAD_LOCAL(0x2a, uint32_t, 4, v)
        LOAD_LOCAL(0x2b, uint64_t, 8, v)
        LOAD_LOCAL(0x2c, int8_t, 1, static_cast<uint32_t>(int32_t{v}))
        LOAD_LOCAL(0x2d, uint8_t, 1, v)
        LOAD_LOCAL(0x2e, int16_t, 2, static_cast<uint32_t>(int32_t{v}))
        LOAD_LOCAL(0x2f, uint16_t, 2, v)
        LOAD_LOCAL(0x30, int8_t, 1, static_cast<uint64_t>(int64_t{v}))
        LOAD_LOCAL(0x31, uint8_t, 1, v)
        LOAD_LOCAL(0x32, int16_t, 2, static_cast<uint64_t>(int64_t{v}))
        LOAD_LOCAL(0x33, uint16_t, 2, v)
        LOAD_LOCAL(0x34, int32_t, 4, static_cast<uint64_t>(int64_t{v}))
        LOAD_LOCAL(0x35, uint32_t, 4, v)
#undef LOAD_LOCAL

    op_invalid:
        throw InternalError{"unknown internal opcode"};
    }
}

#undef BIN_I32
#undef BIN_I64
#undef UN_I32
#undef UN_I64
#undef CMP_F32
#undef CMP_F64
#undef BIN_F32
#undef BIN_F64
#undef UN_F32
#undef UN_F64
#undef ADDRESS
#undef LOAD
#undef STORE
#undef NEXT
#undef HANDLER
#undef HANDLER_ADDRESS
#undef FUSED_ADDRESS

void bind_handlers(CompiledCode& code)
{
    for (CompiledFunction& fn : code.functions)
        for (Op& op : fn.code)
            op.code = op.code < slot_of_code.size() ? slot_of_code[op.code] : 0;
}

namespace {

template <BoundsStrategy S>
void dispatch(Instance& inst, bool metered, uint32_t func_index, uint64_t* fp)
{
    if (metered)
        Executor::call_any<S, true>(inst, func_index, fp);
    else
        Executor::call_any<S, false>(inst, func_index, fp);
}

}  // namespace
}  // namespace gobi::detail

namespace gobi {

ExecutionResult Instance::run(uint32_t func_index, std::span<const Value> args)
{
    const FuncType& type = module_->function_type(func_index);
    if (stack_.empty())
    {
        constexpr size_t slots_per_page = 4096 / sizeof(uint64_t);
        stack_.resize(config_.stack_slots + slots_per_page);
        const auto addr = reinterpret_cast<uintptr_t>(stack_.data());
        stack_base_ = stack_.data() + ((4096 - addr % 4096) % 4096) / sizeof(uint64_t);
        stack_end_ = stack_base_ + config_.stack_slots;
    }

    const bool nested = depth_ > 0;
    const uint32_t saved_depth = depth_;
    uint64_t* const saved_top = stack_top_;
    uint64_t* const fp = nested ? stack_top_ : stack_base_;

    ExecutionResult result;
    if (fp + std::max(type.params.size(), type.results.size()) > stack_end_)
    {
        result.trap = Trap{TrapKind::CallStackExhausted, "operand stack exhausted", 0};
        return result;
    }
    for (size_t i = 0; i < args.size(); ++i)
        fp[i] = args[i].bits();
    if (!nested)
        fuel_ = config_.fuel.value_or(0);

    try
    {
        const bool metered = config_.fuel.has_value();
        switch (memory_ ? memory_->strategy() : BoundsStrategy::checked)
        {
        case BoundsStrategy::checked:
            detail::dispatch<BoundsStrategy::checked>(*this, metered, func_index, fp);
            break;
        case BoundsStrategy::masked:
            detail::dispatch<BoundsStrategy::masked>(*this, metered, func_index, fp);
            break;
        case BoundsStrategy::unchecked:
            detail::dispatch<BoundsStrategy::unchecked>(*this, metered, func_index, fp);
            break;
        }
    }
    catch (const TrapException& e)
    {
        depth_ = saved_depth;
        stack_top_ = saved_top;
        result.trap = e.trap();
        return result;
    }
    catch (...)
    {
        depth_ = saved_depth;
        stack_top_ = saved_top;
        throw;
    }
    depth_ = saved_depth;
    stack_top_ = saved_top;

    result.values.reserve(type.results.size());
    for (size_t i = 0; i < type.results.size(); ++i)
        result.values.push_back(Value::from_bits(type.results[i], fp[i]));
    return result;
}

}  // namespace gobi
