// Gobi: WebAssembly library sandboxing runtime
// Copyright 2026 The Gobi Authors.
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2; only called after a runtime CPU check.

#include "gobi/simd.hpp"
#include <immintrin.h>

namespace gobi::simd::detail {

bool pack_avx2(const uint8_t* in, uint8_t* out, size_t count)
{
    const __m256i high = _mm256_set1_epi64x(static_cast<long long>(0xffffffff00000000ull));
    const __m256i low_lanes = _mm256_setr_epi32(0, 2, 4, 6, 1, 3, 5, 7);
    size_t i = 0;
    for (; i + 4 <= count; i += 4)
    {
        const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + 8 * i));
        if (!_mm256_testz_si256(v, high))
            return false;
        const __m256i packed = _mm256_permutevar8x32_epi32(v, low_lanes);
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out + 4 * i), _mm256_castsi256_si128(packed));
    }
    return scalar_kernels().pack(in + 8 * i, out + 4 * i, count - i);
}

void unpack_avx2(const uint8_t* in, uint8_t* out, size_t count)
{
    size_t i = 0;
    for (; i + 4 <= count; i += 4)
    {
        const __m128i w = _mm_loadu_si128(reinterpret_cast<const __m128i*>(in + 4 * i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + 8 * i), _mm256_cvtepu32_epi64(w));
    }
    scalar_kernels().unpack(in + 4 * i, out + 8 * i, count - i);
}

}  // namespace gobi::simd::detail
