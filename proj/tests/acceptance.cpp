// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. `acceptance N...` runs a subset.

#include "gobi/abi.hpp"
#include "gobi/bench.hpp"
#include "gobi/binary.hpp"
#include "gobi/fixture.hpp"
#include "gobi/sandbox.hpp"
#include "gobi/wat.hpp"
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace gobi;

namespace {

const std::filesystem::path fixture_dir{GOBI_FIXTURE_DIR};

struct Outcome
{
    bool passed = false;
    std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

std::string read_text(const std::filesystem::path& p)
{
    const std::vector<uint8_t> bytes = read_file_bytes(p);
    return {bytes.begin(), bytes.end()};
}

std::shared_ptr<const ModuleIR> wat(std::string_view text)
{
    return std::make_shared<const ModuleIR>(parse_wat(text));
}

bool trapped_with(const ExecutionResult& r, TrapKind kind) { return r.trap && r.trap->kind == kind; }

std::vector<std::filesystem::path> every_fixture()
{
    std::vector<std::filesystem::path> out;
    for (const char* sub : {"conformance", "hostile", "kernels"})
    {
        const auto part = list_fixtures(fixture_dir / sub);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

Outcome conformance()
{
    const auto paths = list_fixtures(fixture_dir / "conformance");
    std::string transcripts;
    size_t failed = 0;
    std::string first_failure;
    for (const auto& p : paths)
    {
        const FixtureReport r = run_fixture(p);
        if (!r.passed())
        {
            if (failed++ == 0)
                first_failure = r.transcript();
        }
        transcripts += r.transcript();
    }
    if (paths.size() < 30)
        return fail(std::to_string(paths.size()) + " fixtures, need 30");
    if (failed != 0)
        return fail(std::to_string(failed) + " fixtures failed, first:\n" + first_failure);
    // Required cases must be present, and passing, in the suite.
    for (const char* needle : {"expect add 2 3 -> 5 => 5", "expect fib 10 -> 55 => 55", "=> trap DivideByZero",
                               "-2147483648 -1 -> trap IntegerOverflow => trap IntegerOverflow",
                               "=> trap CallStackExhausted"})
        if (transcripts.find(needle) == std::string::npos)
            return fail(std::string{"no passing case matching '"} + needle + "'");
    return pass(std::to_string(paths.size()) + " fixtures");
}

Outcome isolation()
{
    ExecConfig config;
    config.canary_bytes = 4096;
    auto inst = instantiate(wat(R"((module
      (memory 1 1)
      (func (export "ld8") (param i32) (result i64) local.get 0 i64.load8_u)
      (func (export "ld32") (param i32) (result i64) local.get 0 i64.load32_u)
      (func (export "ld64") (param i32) (result i64) local.get 0 i64.load)
      (func (export "ldoff") (param i32) (result i64) local.get 0 i64.load offset=4096)
      (func (export "st8") (param i32) (result i64) local.get 0 i64.const -1 i64.store8 i64.const 0)
      (func (export "st32") (param i32) (result i64) local.get 0 i64.const -1 i64.store32 i64.const 0)
      (func (export "st64") (param i32) (result i64) local.get 0 i64.const -1 i64.store i64.const 0)
      (func (export "stoff") (param i32) (result i64) local.get 0 i64.const -1 i64.store offset=4096 i64.const 0)))"),
                            HostModuleRegistry{}, config);
    static constexpr const char* probes[] = {"ld8", "ld32", "ld64", "ldoff", "st8", "st32", "st64", "stoff"};
    const auto length = static_cast<uint32_t>(inst->memory().size_bytes());
    std::mt19937_64 rng{0x15014710};
    uint32_t traps = 0;
    for (int i = 0; i < 10000; ++i)
    {
        const uint32_t addr = length + static_cast<uint32_t>(rng() % (uint64_t{0x100000000} - length));
        if (trapped_with(inst->invoke(probes[rng() % 8], {Value::i32(addr)}), TrapKind::OutOfBoundsMemory))
            ++traps;
    }
    const std::vector<uint8_t> mem = inst->read_memory(0, length);
    const auto dirty = std::count_if(mem.begin(), mem.end(), [](uint8_t b) { return b != 0; });
    if (traps != 10000)
        return fail(std::to_string(traps) + "/10000 trapped");
    if (!inst->memory().canaries_intact())
        return fail("canary bytes mutated");
    if (dirty != 0)
        return fail("memory modified by trapping stores");
    return pass("10000/10000 trapped, canaries intact");
}

Outcome adaptation()
{
    using namespace abi;
    const auto recs = parse_records(read_text(fixture_dir / "records" / "corpus.rec"));
    std::map<std::string, const RecordDef*> by_name;
    for (const auto& r : recs)
        by_name[r->name] = r.get();
    const MachineModel host = MachineModel::host64();
    const MachineModel wasm = MachineModel::wasm32();

    // Coverage of the requested field kinds.
    std::set<std::string> kinds;
    for (const auto& r : recs)
    {
        for (const Field& f : r->fields)
        {
            const FieldType* t = &f.type;
            bool in_array = false;
            while (t->element)
            {
                in_array = true;
                t = t->element.get();
            }
            if (t->record)
                kinds.insert("record");
            else if (t->scalar == Scalar::ptr)
                kinds.insert(in_array ? "ptr-array" : "ptr");
            else
                kinds.insert("scalar");
        }
    }
    if (kinds.size() != 4)
        return fail("corpus misses a field kind");

    std::istringstream expected{read_text(fixture_dir / "records" / "corpus.expected")};
    std::string line;
    size_t rows = 0;
    size_t compatible = 0;
    while (std::getline(expected, line))
    {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream ls{line};
        std::string name, model, offs;
        uint64_t size = 0;
        uint32_t align = 0;
        ls >> name >> model >> size >> align >> offs;
        const RecordDef& rec = *by_name.at(name);
        const LayoutResult r = model == "host64"   ? layout(rec, host)
                               : model == "wasm32" ? layout(rec, wasm)
                                                   : layout_adapted(rec, host);
        std::string got;
        for (const auto& f : r.fields)
            got += (got.empty() ? "" : ",") + std::to_string(f.offset);
        if (got != offs || r.size != size || r.align != align)
            return fail(name + " " + model + " differs from the layout oracle");
        if (model == "adapted")
            compatible += check_compatible(rec, host).compatible;
        ++rows;
    }
    if (recs.size() != 200 || rows != 600)
        return fail("corpus incomplete");
    if (compatible != 200)
        return fail(std::to_string(compatible) + "/200 compatible");
    return pass("200/200 compatible, 600 layouts match the oracle");
}

std::string hex(std::span<const uint8_t> bytes)
{
    std::string s;
    char buf[3];
    for (uint8_t b : bytes)
    {
        std::snprintf(buf, sizeof buf, "%02x", b);
        s += buf;
    }
    return s;
}

Outcome pointer_arrays()
{
    using namespace abi;
    // Hand-computed: 32-bit values packed to the front, the back half zeroed.
    struct Case
    {
        std::vector<uint64_t> values;
        const char* packed;
    };
    const Case cases[] = {
        {{}, ""},
        {{0x11223344}, "4433221100000000"},
        {{0x10, 0x20}, "10000000200000000000000000000000"},
        {{1, 0xffffffff, 0x80000000}, "01000000ffffffff00000080"},
    };
    for (const Case& c : cases)
    {
        std::vector<uint8_t> buf(8 * c.values.size());
        for (size_t k = 0; k < c.values.size(); ++k)
            for (int b = 0; b < 8; ++b)
                buf[8 * k + b] = static_cast<uint8_t>(c.values[k] >> (8 * b));
        if (!convert_ptr_array_in_place(buf, c.values.size(), Direction::host_to_sandbox))
            return fail("hand case rejected");
        std::string want = c.packed;
        want.resize(16 * c.values.size(), '0');
        if (hex(buf) != want)
            return fail("hand case packs to " + hex(buf));
    }

    std::mt19937_64 rng{4};
    for (int i = 0; i < 1000; ++i)
    {
        const size_t count = rng() % 65;
        std::vector<uint8_t> buf(8 * count);
        for (size_t k = 0; k < count; ++k)
        {
            const uint64_t v = rng() & 0xffffffff;
            for (int b = 0; b < 8; ++b)
                buf[8 * k + b] = static_cast<uint8_t>(v >> (8 * b));
        }
        const auto original = buf;
        if (!convert_ptr_array_in_place(buf, count, Direction::host_to_sandbox) ||
            !convert_ptr_array_in_place(buf, count, Direction::sandbox_to_host) || buf != original)
            return fail("round trip " + std::to_string(i) + " differs");
    }
    return pass("4 hand cases, 1000 random round trips");
}

Outcome cfi()
{
    Sandbox sb = Sandbox::create(wat(R"((module
      (type $a (func (param i32) (result i32)))
      (type $b (func (param i64) (result i64)))
      (type $c (func (param f32) (result f32)))
      (type $d (func (param i32 i32) (result i32)))
      (memory 1)
      (table 0 funcref)
      (func (export "via_a") (param $slot i32) (result i32)
        i32.const 10 local.get $slot call_indirect (type $a))
      (func (export "via_b") (param $slot i32) (result i32)
        i64.const 10 local.get $slot call_indirect (type $b) i32.wrap_i64)
      (func (export "via_c") (param $slot i32) (result i32)
        f32.const 10 local.get $slot call_indirect (type $c) i32.trunc_f32_s)
      (func (export "via_d") (param $slot i32) (result i32)
        i32.const 10 i32.const 20 local.get $slot call_indirect (type $d))))"));
    std::vector<CallbackHandle> h;
    h.push_back(sb.register_callback({{ValKind::I32}, {ValKind::I32}}, [](Instance&, std::span<const Value> a) {
        return std::vector{Value::i32(a[0].as_u32() + 1)};
    }));
    h.push_back(sb.register_callback({{ValKind::I64}, {ValKind::I64}}, [](Instance&, std::span<const Value> a) {
        return std::vector{Value::i64(a[0].as_u64() + 2)};
    }));
    h.push_back(sb.register_callback({{ValKind::F32}, {ValKind::F32}}, [](Instance&, std::span<const Value> a) {
        return std::vector{Value::f32(a[0].as_f32() + 3)};
    }));
    h.push_back(sb.register_callback({{ValKind::I32, ValKind::I32}, {ValKind::I32}},
                                     [](Instance&, std::span<const Value> a) {
                                         return std::vector{Value::i32(a[0].as_u32() + a[1].as_u32() + 4)};
                                     }));
    const uint32_t expected[] = {11, 12, 13, 34};
    static constexpr const char* callers[] = {"via_a", "via_b", "via_c", "via_d"};
    for (size_t cb = 0; cb < 4; ++cb)
    {
        for (size_t t = 0; t < 4; ++t)
        {
            const ExecutionResult r = sb.call_export(callers[t], {Value::i32(h[cb].slot)});
            const bool ok = cb == t ? !r.trap && r.values.size() == 1 && r.values[0].as_u32() == expected[cb]
                                    : trapped_with(r, TrapKind::IndirectCallTypeMismatch);
            if (!ok)
                return fail("callback " + std::to_string(cb) + " via type " + std::to_string(t));
        }
    }
    return pass("4 dispatches on the diagonal, 12 mismatch traps off it");
}

Outcome swizzle()
{
    Sandbox sb = Sandbox::create(wat("(module (memory 1 1))"));
    auto rejects = [&](uint32_t offset, uint32_t length, SandboxError want) {
        try
        {
            sb.swizzle(SandboxPtr{offset}, length);
        }
        catch (const SandboxException& e)
        {
            return e.code() == want;
        }
        return false;
    };
    for (uint32_t o = 1; o < 65536; ++o)
    {
        const HostRef r = sb.swizzle(SandboxPtr{o}, 1);
        if (sb.unswizzle(r).offset != o)
            return fail("offset " + std::to_string(o) + " does not round trip");
        // The extent reaching exactly to the end is valid; one more byte is not.
        if (!rejects(o, 65536 - o + 1, SandboxError::SwizzleOutOfBounds))
            return fail("extent past the end accepted at " + std::to_string(o));
    }
    if (!rejects(0, 1, SandboxError::NullPointer))
        return fail("null accepted");
    if (!rejects(65536, 1, SandboxError::SwizzleOutOfBounds))
        return fail("offset 65536 accepted");
    return pass("65535 offsets round trip; 0 and out-of-range extents rejected");
}

Outcome sessions()
{
    const auto m = wat(R"((module
      (type $ii (func (param i32) (result i32)))
      (memory 1 4)
      (table 2 funcref)
      (global $count (mut i32) (i32.const 0))
      (global $acc (mut i64) (i64.const 7))
      (data (i32.const 1024) "session data")
      (elem (i32.const 0) $id)
      (func $id (param i32) (result i32) local.get 0)
      (func (export "store8") (param i32 i32) local.get 0 local.get 1 i32.store8)
      (func (export "bump") global.get $count i32.const 1 i32.add global.set $count
        global.get $acc i64.const 3 i64.mul global.set $acc)
      (func (export "grow") (param i32) (result i32) local.get 0 memory.grow)
      (func (export "boom") unreachable)))");
    const FuncType ii{{ValKind::I32}, {ValKind::I32}};
    std::mt19937_64 rng{2026};
    auto snapshot = [](Sandbox& s) {
        std::vector<uint64_t> state;
        const auto mem = s.copy_out(SandboxPtr{0}, static_cast<uint32_t>(s.instance().memory().size_bytes()));
        state.insert(state.end(), mem.begin(), mem.end());
        for (uint32_t g = 0; g < s.instance().global_count(); ++g)
            state.push_back(s.instance().global(g).as_u64());
        for (uint32_t t = 0; t < s.instance().table_size(); ++t)
        {
            const TableEntry& e = s.instance().table_entry(t);
            state.push_back((uint64_t{static_cast<uint8_t>(e.kind)} << 48) ^ (uint64_t{e.sig_id} << 32) ^ e.index);
        }
        return state;
    };
    for (int round = 0; round < 100; ++round)
    {
        Sandbox a = Sandbox::create(m);
        Sandbox b = Sandbox::create(m);
        const auto before = snapshot(b);
        for (int op = 0; op < 25; ++op)
        {
            switch (rng() % 7)
            {
            case 0:
                a.call_export("store8", {Value::i32(static_cast<uint32_t>(rng() % 70000)), Value::i32(0xff)});
                break;
            case 1: a.call_export("bump", {}); break;
            case 2: a.malloc(1 + static_cast<uint32_t>(rng() % 5000)); break;
            case 3:
                if (a.callback_count() < 32)
                    a.register_callback(ii, [](Instance&, std::span<const Value> v) { return std::vector{v[0]}; });
                break;
            case 4: a.call_export("grow", {Value::i32(1)}); break;
            case 5: a.instance().set_global(0, Value::i32(static_cast<uint32_t>(rng()))); break;
            default: a.call_export("boom", {}); break;
            }
        }
        if (snapshot(b) != before)
            return fail("sandbox B changed in round " + std::to_string(round));
    }
    return pass("100 sequences, B byte-identical");
}

Outcome round_trip()
{
    size_t modules = 0;
    for (const auto& p : every_fixture())
    {
        if (read_text(p).find(";; expect-invalid") != std::string::npos)
            continue;
        const ModuleIR m = load_module(p);
        const std::vector<uint8_t> bytes = encode_binary(m);
        if (!(decode_binary(bytes) == m))
            return fail("decode(encode(m)) != m for " + p.filename().string());
        if (encode_binary(decode_binary(bytes)) != bytes)
            return fail("encode(decode(b)) != b for " + p.filename().string());
        ++modules;
    }
    return pass(std::to_string(modules) + " modules, both directions");
}

Outcome bench_harness()
{
    bench::Options o;
    o.kernels = {"adler", "requant", "memrev"};
    o.strategies = {BoundsStrategy::checked, BoundsStrategy::masked, BoundsStrategy::unchecked};
    o.allow_unchecked = true;
    const auto start = std::chrono::steady_clock::now();
    const std::vector<bench::Result> results = bench::run(o);  // throws on checksum mismatch
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::ostringstream csv;
    bench::write_csv(csv, results);
    std::fputs(csv.str().c_str(), stdout);

    std::map<std::string, std::map<BoundsStrategy, const bench::Result*>> by_kernel;
    for (const bench::Result& r : results)
        by_kernel[r.kernel][r.strategy] = &r;
    std::string ratios;
    bool ordered = true;
    for (auto& [name, row] : by_kernel)
    {
        const double ratio = static_cast<double>(row.at(BoundsStrategy::checked)->sandbox_ns) /
                             static_cast<double>(row.at(BoundsStrategy::unchecked)->sandbox_ns);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%s %.3f", ratios.empty() ? "" : ", ", name.c_str(), ratio);
        ratios += buf;
        ordered = ordered && ratio >= 0.95;
        if (row.at(BoundsStrategy::checked)->checksum != row.at(BoundsStrategy::unchecked)->checksum)
            return fail(name + " checksums differ");
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.1f s", secs);
    const std::string detail = std::string{timing} + ", checked/unchecked " + ratios;
    if (results.size() != 9)
        return fail("expected 9 rows");
    if (secs >= 60)
        return fail(detail + ": over 60 s");
    if (!ordered)
        return fail(detail + ": checked below 0.95 x unchecked");
    return pass(detail);
}

std::string strip_timing(const std::string& csv)
{
    // Drops native_ns, sandbox_ns and overhead_pct (columns 5-7).
    std::istringstream in{csv};
    std::string out;
    std::string line;
    while (std::getline(in, line))
    {
        std::vector<std::string> cols;
        std::istringstream ls{line};
        std::string c;
        while (std::getline(ls, c, ','))
            cols.push_back(c);
        for (size_t i = 0; i < cols.size(); ++i)
            if (i < 4 || i > 6)
                out += cols[i] + ',';
        out += '\n';
    }
    return out;
}

Outcome determinism()
{
    FixtureOptions options;
    options.force_deterministic = true;
    auto suite = [&] {
        std::string out;
        for (const auto& p : every_fixture())
            out += run_fixture(p, options).transcript();
        return out;
    };
    const std::string first = suite();
    if (first != suite())
        return fail("fixture transcripts differ between runs");

    bench::Options o;
    o.kernels = {"adler", "requant", "memrev"};
    o.size = 4096;
    o.iters = 2;
    o.runs = 1;
    o.strategies = {BoundsStrategy::checked, BoundsStrategy::masked};
    auto csv = [&] {
        std::ostringstream s;
        bench::write_csv(s, bench::run(o));
        return strip_timing(s.str());
    };
    if (csv() != csv())
        return fail("bench rows differ outside the timing columns");
    return pass(std::to_string(first.size()) + " transcript bytes identical; bench rows identical");
}

struct Criterion
{
    int number;
    const char* name;
    double limit_s;  // 0: no limit of its own
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv)
{
    const Criterion criteria[] = {
        {1, "interpreter conformance", 10, conformance},
        {2, "isolation under checked bounds", 30, isolation},
        {3, "record adaptation", 0, adaptation},
        {4, "pointer-array conversion", 0, pointer_arrays},
        {5, "callback signature matrix", 0, cfi},
        {6, "swizzle bijection", 0, swizzle},
        {7, "per-session isolation", 0, sessions},
        {8, "binary round trip", 0, round_trip},
        {9, "bench harness", 60, bench_harness},
        {10, "determinism", 0, determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& c : criteria)
    {
        if (!only.empty() && !only.contains(c.number))
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch (const std::exception& e)
        {
            o = fail(std::string{"exception: "} + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit_s > 0 && secs >= c.limit_s && o.passed)
            o = fail(o.detail + ": over the time limit");
        failures += !o.passed;
        std::printf("%s criterion %d: %s (%.2f s) %s\n", o.passed ? "PASS" : "FAIL", c.number, c.name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
