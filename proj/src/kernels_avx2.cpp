// AVX2 kernel variants. Compiled with -mavx2 in this TU only; callers reach
// them through the dispatch table after a cpuid check.

#include "iotwl/kernels.hpp"

#include <immintrin.h>

namespace iotwl::kernels::avx2 {

namespace {

inline uint64_t hsum_u64(__m256i v) {
    alignas(32) uint64_t lanes[4];
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), v);
    return lanes[0] + lanes[1] + lanes[2] + lanes[3];
}

inline double hsum_f64(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return lanes[0] + lanes[1] + lanes[2] + lanes[3];
}

} // namespace

U8Summary u8_summary(std::span<const uint8_t> v) {
    U8Summary s;
    if (v.empty()) return s;
    s.count = v.size();
    s.min = 255;
    s.max = 0;

    const uint8_t* p = v.data();
    size_t n = v.size();
    size_t i = 0;

    __m256i vmin = _mm256_set1_epi8(static_cast<char>(0xff));
    __m256i vmax = _mm256_setzero_si256();
    __m256i vsum = _mm256_setzero_si256();   // 4 x u64 partial sums
    __m256i vsumsq = _mm256_setzero_si256(); // 4 x u64 partial sums
    const __m256i zero = _mm256_setzero_si256();

    for (; i + 32 <= n; i += 32) {
        __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i));
        vmin = _mm256_min_epu8(vmin, x);
        vmax = _mm256_max_epu8(vmax, x);
        // byte sum: sad against zero yields 4 u64 lanes
        vsum = _mm256_add_epi64(vsum, _mm256_sad_epu8(x, zero));
        // squares: widen to u16 (255^2 fits), madd pairs into i32, widen to u64
        __m256i lo = _mm256_unpacklo_epi8(x, zero);
        __m256i hi = _mm256_unpackhi_epi8(x, zero);
        __m256i sq = _mm256_add_epi32(_mm256_madd_epi16(lo, lo), _mm256_madd_epi16(hi, hi));
        vsumsq = _mm256_add_epi64(vsumsq, _mm256_add_epi64(_mm256_cvtepu32_epi64(_mm256_castsi256_si128(sq)),
                                                           _mm256_cvtepu32_epi64(_mm256_extracti128_si256(sq, 1))));
    }

    s.sum = hsum_u64(vsum);
    s.sumsq = hsum_u64(vsumsq);

    alignas(32) uint8_t mins[32], maxs[32];
    _mm256_store_si256(reinterpret_cast<__m256i*>(mins), vmin);
    _mm256_store_si256(reinterpret_cast<__m256i*>(maxs), vmax);
    if (i > 0) {
        for (int k = 0; k < 32; ++k) {
            if (mins[k] < s.min) s.min = mins[k];
            if (maxs[k] > s.max) s.max = maxs[k];
        }
    }

    for (; i < n; ++i) {
        uint8_t x = p[i];
        s.sum += x;
        s.sumsq += static_cast<uint64_t>(x) * x;
        if (x < s.min) s.min = x;
        if (x > s.max) s.max = x;
    }
    return s;
}

uint64_t u32_sum(std::span<const uint32_t> v) {
    const uint32_t* p = v.data();
    size_t n = v.size();
    size_t i = 0;
    __m256i acc = _mm256_setzero_si256();
    for (; i + 8 <= n; i += 8) {
        __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(p + i));
        acc = _mm256_add_epi64(acc, _mm256_cvtepu32_epi64(_mm256_castsi256_si128(x)));
        acc = _mm256_add_epi64(acc, _mm256_cvtepu32_epi64(_mm256_extracti128_si256(x, 1)));
    }
    uint64_t sum = hsum_u64(acc);
    for (; i < n; ++i) sum += p[i];
    return sum;
}

double f64_sum(std::span<const double> v) {
    const double* p = v.data();
    size_t n = v.size();
    size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
    double sum = hsum_f64(acc);
    for (; i < n; ++i) sum += p[i];
    return sum;
}

double f64_min(std::span<const double> v) {
    const double* p = v.data();
    size_t n = v.size();
    double m = p[0];
    size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(p);
        for (i = 4; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(p + i));
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, acc);
        m = lanes[0];
        for (int k = 1; k < 4; ++k)
            if (lanes[k] < m) m = lanes[k];
    }
    for (; i < n; ++i)
        if (p[i] < m) m = p[i];
    return m;
}

double f64_max(std::span<const double> v) {
    const double* p = v.data();
    size_t n = v.size();
    double m = p[0];
    size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_loadu_pd(p);
        for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(p + i));
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, acc);
        m = lanes[0];
        for (int k = 1; k < 4; ++k)
            if (lanes[k] > m) m = lanes[k];
    }
    for (; i < n; ++i)
        if (p[i] > m) m = p[i];
    return m;
}

} // namespace iotwl::kernels::avx2
