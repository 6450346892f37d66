// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/instance.hpp"
#include "gobi/wat.hpp"
#include <gtest/gtest.h>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace gobi::test {

inline std::shared_ptr<const ModuleIR> wat(std::string_view text)
{
    return std::make_shared<const ModuleIR>(parse_wat(text));
}

inline std::unique_ptr<Instance> instance(std::string_view text, ExecConfig config = {},
                                          const ImportResolver* imports = nullptr)
{
    static const HostModuleRegistry empty;
    return instantiate(wat(text), imports ? *imports : empty, std::move(config));
}

inline std::vector<uint8_t> from_hex(std::string_view hex)
{
    std::vector<uint8_t> out;
    for (size_t i = 0; i + 1 < hex.size(); i += 2)
        out.push_back(static_cast<uint8_t>(std::stoul(std::string{hex.substr(i, 2)}, nullptr, 16)));
    return out;
}

inline std::string to_hex(std::span<const uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (uint8_t b : bytes)
    {
        s += digits[b >> 4];
        s += digits[b & 15];
    }
    return s;
}

inline ::testing::AssertionResult returns(const ExecutionResult& r, std::vector<Value> expected)
{
    if (r.trap)
        return ::testing::AssertionFailure() << "trapped: " << to_string(r.trap->kind) << " (" << r.trap->detail
                                             << ")";
    if (r.values != expected)
    {
        auto failure = ::testing::AssertionFailure() << "got";
        for (const Value& v : r.values)
            failure << ' ' << to_string(v);
        return failure;
    }
    return ::testing::AssertionSuccess();
}

inline ::testing::AssertionResult traps(const ExecutionResult& r, TrapKind kind)
{
    if (!r.trap)
        return ::testing::AssertionFailure() << "did not trap";
    if (r.trap->kind != kind)
        return ::testing::AssertionFailure() << "trapped with " << to_string(r.trap->kind);
    return ::testing::AssertionSuccess();
}

}  // namespace gobi::test
