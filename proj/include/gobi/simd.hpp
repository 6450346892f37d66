// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace gobi::simd {

/// Pointer-array width conversion kernels. Values are little-endian.
struct PtrKernels
{
    std::string_view name;
    /// 8-byte values -> 4-byte values. Returns false (output unspecified)
    /// if some value does not fit in 32 bits.
    bool (*pack)(const uint8_t* in, uint8_t* out, size_t count);
    /// 4-byte values -> zero-extended 8-byte values.
    void (*unpack)(const uint8_t* in, uint8_t* out, size_t count);
};

const PtrKernels& scalar_kernels() noexcept;
/// Null when not compiled in or not supported by this CPU.
const PtrKernels* avx2_kernels() noexcept;
/// Best supported variant; GOBI_SIMD=scalar in the environment forces scalar.
const PtrKernels& active_kernels() noexcept;

}  // namespace gobi::simd
