// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/fixture.hpp"
#include "gobi/binary.hpp"
#include "gobi/syscalls.hpp"
#include "gobi/validate.hpp"
#include "gobi/wat.hpp"
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace gobi {

namespace {

std::vector<std::string> split_words(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string{s}};
    std::string w;
    while (in >> w)
        out.push_back(w);
    return out;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

bool is_nan(const Value& v)
{
    if (v.kind() == ValKind::F32)
        return std::isnan(v.as_f32());
    if (v.kind() == ValKind::F64)
        return std::isnan(v.as_f64());
    return false;
}

std::string format_values(const std::vector<Value>& values)
{
    std::string out;
    for (const Value& v : values)
        out += (out.empty() ? "" : " ") + format_plain(v);
    return out;
}

struct Directive
{
    uint32_t line = 0;
    std::string kind;  // config, expect, expect-invalid
    std::string body;
};

std::vector<Directive> scan_directives(std::string_view text)
{
    std::vector<Directive> out;
    uint32_t line_no = 0;
    size_t pos = 0;
    while (pos <= text.size())
    {
        const size_t nl = std::min(text.find('\n', pos), text.size());
        const std::string_view line = trim(text.substr(pos, nl - pos));
        ++line_no;
        pos = nl + 1;
        if (!line.starts_with(";;"))
            continue;
        const std::string_view rest = trim(line.substr(2));
        for (std::string_view kind : {"expect-invalid", "expect", "config"})
        {
            if (rest.starts_with(kind) && (rest.size() == kind.size() || rest[kind.size()] == ' '))
            {
                out.push_back({line_no, std::string{kind}, std::string{trim(rest.substr(kind.size()))}});
                break;
            }
        }
    }
    return out;
}

// Evaluates one "NAME ARG... -> RESULT..." directive.
std::string evaluate(Instance& inst, const std::string& body, bool& passed)
{
    passed = false;
    const size_t arrow = body.find("->");
    if (arrow == std::string::npos)
        return "error: missing ->";
    const auto call = split_words(body.substr(0, arrow));
    const auto expected = split_words(body.substr(arrow + 2));
    if (call.empty())
        return "error: missing export name";

    const Export* exp = inst.module().find_export(call[0]);
    if (exp == nullptr || exp->kind != ExternKind::func)
        return "error: unknown export " + call[0];
    const FuncType& type = inst.module().function_type(exp->index);
    if (call.size() - 1 != type.params.size())
        return "error: expected " + std::to_string(type.params.size()) + " arguments";
    std::vector<Value> args;
    for (size_t i = 0; i < type.params.size(); ++i)
    {
        const auto v = parse_value(type.params[i], call[i + 1]);
        if (!v)
            return "error: bad argument " + call[i + 1];
        args.push_back(*v);
    }

    const ExecutionResult r = inst.invoke(call[0], args);
    if (r.trap)
    {
        const std::string actual = r.trap->is_exit() ? "exit " + std::to_string(r.trap->host_code)
                                                     : "trap " + std::string{to_string(r.trap->kind)};
        passed = split_words(actual) == expected;
        return actual;
    }
    const std::string actual = format_values(r.values);
    if (expected.size() != r.values.size())
        return actual;
    for (size_t i = 0; i < expected.size(); ++i)
    {
        const Value& got = r.values[i];
        if (expected[i] == "nan")
        {
            if (!is_nan(got))
                return actual;
            continue;
        }
        const auto want = parse_value(got.kind(), expected[i]);
        if (!want || want->as_u64() != got.as_u64())
            return actual;
    }
    passed = true;
    return actual;
}

void apply_config(const std::string& body, ExecConfig& config)
{
    for (const std::string& word : split_words(body))
    {
        const size_t eq = word.find('=');
        const std::string key = word.substr(0, eq);
        const std::string value = eq == std::string::npos ? "" : word.substr(eq + 1);
        if (key == "deterministic")
            config.deterministic = true;
        else if (key == "fuel")
            config.fuel = std::stoull(value);
        else if (key == "max-call-depth")
            config.max_call_depth = static_cast<uint32_t>(std::stoul(value));
        else if (key == "max-pages")
            config.max_pages = static_cast<uint32_t>(std::stoul(value));
        else if (key == "bounds")
        {
            const auto s = bounds_strategy_from_name(value);
            if (!s)
                throw Error{"unknown bounds strategy " + value};
            config.strategy = *s;
        }
        else
            throw Error{"unknown config key " + key};
    }
}

}  // namespace

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in)
        throw IoError{"cannot open " + path.string()};
    std::vector<uint8_t> bytes{std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
    if (in.bad())
        throw IoError{"cannot read " + path.string()};
    return bytes;
}

ModuleIR load_module(const std::filesystem::path& path)
{
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    if (has_wasm_magic(bytes))
        return decode_binary(bytes);
    return parse_wat(std::string_view{reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

std::optional<Value> parse_value(ValKind kind, std::string_view text)
{
    switch (kind)
    {
    case ValKind::I32:
        if (const auto v = parse_i32_literal(text))
            return Value::i32(*v);
        break;
    case ValKind::I64:
        if (const auto v = parse_i64_literal(text))
            return Value::i64(*v);
        break;
    case ValKind::F32:
        if (const auto v = parse_f32_literal(text))
            return Value::f32_bits(*v);
        break;
    case ValKind::F64:
        if (const auto v = parse_f64_literal(text))
            return Value::f64_bits(*v);
        break;
    }
    return std::nullopt;
}

bool FixtureReport::passed() const noexcept
{
    return error.empty() && !cases.empty() &&
           std::all_of(cases.begin(), cases.end(), [](const FixtureCase& c) { return c.passed; });
}

std::string FixtureReport::transcript() const
{
    std::string out = "fixture " + name + "\n";
    if (!error.empty())
        out += "error: " + error + "\n";
    for (const FixtureCase& c : cases)
        out += std::to_string(c.line) + ": " + c.text + " => " + c.actual + (c.passed ? "" : " FAIL") + "\n";
    return out;
}

FixtureReport run_fixture(const std::filesystem::path& path, const FixtureOptions& options)
{
    FixtureReport report;
    report.name = path.filename().string();
    try
    {
        const std::vector<uint8_t> bytes = read_file_bytes(path);
        const std::string_view text{reinterpret_cast<const char*>(bytes.data()), bytes.size()};
        const std::vector<Directive> directives = scan_directives(text);
        auto module = std::make_shared<const ModuleIR>(parse_wat(text));

        ExecConfig config;
        for (const Directive& d : directives)
            if (d.kind == "config")
                apply_config(d.body, config);
        if (options.strategy)
            config.strategy = *options.strategy;
        if (options.force_deterministic)
            config.deterministic = true;

        const ValidationReport validation = validate(*module);
        bool any_invalid = false;
        for (const Directive& d : directives)
        {
            if (d.kind != "expect-invalid")
                continue;
            any_invalid = true;
            FixtureCase c{d.line, "expect-invalid " + d.body, "", false};
            if (validation.ok)
                c.actual = "valid";
            else
            {
                c.actual = validation.diagnostics.front().message;
                c.passed = validation.mentions(d.body);
            }
            report.cases.push_back(std::move(c));
        }
        if (any_invalid)
            return report;

        HostEnv env;
        env.preopen_sink(1);
        env.set_fixed_clock(0);
        env.seed_rng(0);
        const HostModuleRegistry imports = env.imports();
        auto inst = instantiate(module, imports, config);
        for (const Directive& d : directives)
        {
            if (d.kind != "expect")
                continue;
            FixtureCase c{d.line, "expect " + d.body, "", false};
            try
            {
                c.actual = evaluate(*inst, d.body, c.passed);
            }
            catch (const InvokeError& e)
            {
                c.actual = std::string{"error: "} + e.what();
            }
            report.cases.push_back(std::move(c));
        }
        const std::string out = env.sink_text(1);
        if (!out.empty())
            report.cases.push_back({0, "stdout", out, true});
    }
    catch (const std::exception& e)
    {
        report.error = e.what();
    }
    return report;
}

std::vector<std::filesystem::path> list_fixtures(const std::filesystem::path& dir)
{
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator{dir})
        if (entry.is_regular_file() && entry.path().extension() == ".wat")
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace gobi
