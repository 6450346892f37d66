// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gobi/errors.hpp"
#include "gobi/module.hpp"
#include <cstdint>
#include <span>
#include <vector>

namespace gobi {

/// Decodes the MVP binary format. Padded (non-minimal) LEB128 encodings are
/// accepted. Custom sections are kept as opaque bytes. Throws DecodeError.
ModuleIR decode_binary(std::span<const uint8_t> bytes);

/// Encodes a module with minimal LEB128 encodings.
std::vector<uint8_t> encode_binary(const ModuleIR& module);

/// True if the buffer starts with the binary magic.
bool has_wasm_magic(std::span<const uint8_t> bytes) noexcept;

}  // namespace gobi
