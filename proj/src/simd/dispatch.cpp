// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gobi/simd.hpp"
#include <cstdlib>
#include <string_view>

namespace gobi::simd {

#if defined(GOBI_HAVE_AVX2)
namespace detail {
bool pack_avx2(const uint8_t* in, uint8_t* out, size_t count);
void unpack_avx2(const uint8_t* in, uint8_t* out, size_t count);
}  // namespace detail

namespace {
constexpr PtrKernels avx2{"avx2", detail::pack_avx2, detail::unpack_avx2};
}
#endif

const PtrKernels* avx2_kernels() noexcept
{
#if defined(GOBI_HAVE_AVX2)
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &avx2 : nullptr;
#else
    return nullptr;
#endif
}

const PtrKernels& active_kernels() noexcept
{
    static const PtrKernels& chosen = [&]() -> const PtrKernels& {
        const char* forced = std::getenv("GOBI_SIMD");
        if (forced != nullptr && std::string_view{forced} == "scalar")
            return scalar_kernels();
        if (const PtrKernels* k = avx2_kernels())
            return *k;
        return scalar_kernels();
    }();
    return chosen;
}

}  // namespace gobi::simd
