// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/errors.hpp"
#include "gobi/instance.hpp"
#include "gobi/module.hpp"
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gobi {

/// File could not be read.
class IoError : public Error
{
public:
    using Error::Error;
};

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Loads a .wat or .wasm file (chosen by content: binary magic or text).
/// Throws IoError, ParseError or DecodeError; does not validate.
ModuleIR load_module(const std::filesystem::path& path);

/// Parses `text` as a value of `kind` using text-format literal syntax.
std::optional<Value> parse_value(ValKind kind, std::string_view text);

/// Conformance fixture: a .wat module with directive comments
///   ;; config fuel=N bounds=checked|masked max-call-depth=N deterministic
///   ;; expect NAME ARG... -> RESULT...      (RESULT may be "nan")
///   ;; expect NAME ARG... -> trap KIND
///   ;; expect-invalid SUBSTRING              (module must fail validation)
/// Modules may import the gobi_sys calls; fd 1 is an in-memory sink, the
/// clock is fixed at 0 and the random source is seeded with 0.
struct FixtureCase
{
    uint32_t line = 0;
    std::string text;     // the directive as written
    std::string actual;   // observed outcome, same notation
    bool passed = false;
};

struct FixtureReport
{
    std::string name;
    std::vector<FixtureCase> cases;
    std::string error;  // load/instantiation problem, empty if none

    bool passed() const noexcept;
    /// Deterministic transcript of every case outcome plus sink output.
    std::string transcript() const;
};

struct FixtureOptions
{
    /// Overrides the fixture's own bounds setting when set.
    std::optional<BoundsStrategy> strategy;
    bool force_deterministic = false;
};

FixtureReport run_fixture(const std::filesystem::path& path, const FixtureOptions& options = {});

/// All *.wat files under `dir`, sorted by name.
std::vector<std::filesystem::path> list_fixtures(const std::filesystem::path& dir);

}  // namespace gobi
