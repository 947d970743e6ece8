#include "iotwl/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace iotwl::kernels {

namespace scalar {

U8Summary u8_summary(std::span<const uint8_t> v) {
    U8Summary s;
    if (v.empty()) return s;
    s.count = v.size();
    s.min = 255;
    s.max = 0;
    for (uint8_t x : v) {
        s.sum += x;
        s.sumsq += static_cast<uint64_t>(x) * x;
        if (x < s.min) s.min = x;
        if (x > s.max) s.max = x;
    }
    return s;
}

uint64_t u32_sum(std::span<const uint32_t> v) {
    uint64_t acc = 0;
    for (uint32_t x : v) acc += x;
    return acc;
}

double f64_sum(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
}

double f64_min(std::span<const double> v) {
    double m = v[0];
    for (double x : v)
        if (x < m) m = x;
    return m;
}

double f64_max(std::span<const double> v) {
    double m = v[0];
    for (double x : v)
        if (x > m) m = x;
    return m;
}

} // namespace scalar

bool avx2_supported() {
#if defined(IOTWL_HAVE_AVX2)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

namespace {

std::atomic<int> g_backend{-1}; // -1 = undecided

Backend detect_backend() {
    if (const char* env = std::getenv("IOTWL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
    }
    return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

} // namespace

Backend active_backend() {
    int b = g_backend.load(std::memory_order_relaxed);
    if (b < 0) {
        b = static_cast<int>(detect_backend());
        g_backend.store(b, std::memory_order_relaxed);
    }
    return static_cast<Backend>(b);
}

void force_backend(Backend b) {
    g_backend.store(static_cast<int>(b), std::memory_order_relaxed);
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(IOTWL_HAVE_AVX2)
#define IOTWL_DISPATCH(fn, ...) \
    return active_backend() == Backend::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define IOTWL_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

U8Summary u8_summary(std::span<const uint8_t> v) { IOTWL_DISPATCH(u8_summary, v); }
uint64_t u32_sum(std::span<const uint32_t> v) { IOTWL_DISPATCH(u32_sum, v); }
double f64_sum(std::span<const double> v) { IOTWL_DISPATCH(f64_sum, v); }
double f64_min(std::span<const double> v) { IOTWL_DISPATCH(f64_min, v); }
double f64_max(std::span<const double> v) { IOTWL_DISPATCH(f64_max, v); }

#undef IOTWL_DISPATCH

} // namespace iotwl::kernels
