// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/simd.hpp"
#include <cstring>

namespace gobi::simd {

namespace {

bool pack_scalar(const uint8_t* in, uint8_t* out, size_t count)
{
    for (size_t i = 0; i < count; ++i)
    {
        uint64_t v;
        std::memcpy(&v, in + 8 * i, 8);
        if (v >> 32 != 0)
            return false;
        const auto w = static_cast<uint32_t>(v);
        std::memcpy(out + 4 * i, &w, 4);
    }
    return true;
}

void unpack_scalar(const uint8_t* in, uint8_t* out, size_t count)
{
    for (size_t i = 0; i < count; ++i)
    {
        uint32_t w;
        std::memcpy(&w, in + 4 * i, 4);
        const uint64_t v = w;
        std::memcpy(out + 8 * i, &v, 8);
    }
}

constexpr PtrKernels scalar{"scalar", pack_scalar, unpack_scalar};

}  // namespace

const PtrKernels& scalar_kernels() noexcept
{
    return scalar;
}

}  // namespace gobi::simd
