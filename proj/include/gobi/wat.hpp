// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/errors.hpp"
#include "gobi/module.hpp"
#include <optional>
#include <string_view>

namespace gobi {

/// Parses the supported text-format subset: flat instruction sequences,
/// symbolic and numeric indices, inline export/import abbreviations.
/// Throws ParseError.
ModuleIR parse_wat(std::string_view source);

/// Literal parsers shared with tooling (CLI arguments, test manifests).
/// Each returns nullopt if the text is not a valid literal of that kind.
std::optional<uint32_t> parse_i32_literal(std::string_view text) noexcept;
std::optional<uint64_t> parse_i64_literal(std::string_view text) noexcept;
std::optional<uint32_t> parse_f32_literal(std::string_view text) noexcept;
std::optional<uint64_t> parse_f64_literal(std::string_view text) noexcept;

}  // namespace gobi
