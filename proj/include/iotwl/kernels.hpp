#pragma once

#include <cstdint>
#include <span>

// Reduction kernels behind feature extraction and the evaluation statistics.
// Each kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant; the active backend is chosen once at runtime (cpuid, overridable
// via the IOTWL_KERNELS env var or force_backend). Integer kernels are exact,
// so scalar and AVX2 results are bit-identical; f64_sum may differ from the
// scalar reference by reassociation rounding only.

namespace iotwl::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void force_backend(Backend b);
const char* backend_name(Backend b);
bool avx2_supported();

struct U8Summary {
    uint64_t count = 0;
    uint64_t sum = 0;
    uint64_t sumsq = 0;
    uint8_t min = 0; // valid only when count > 0
    uint8_t max = 0;
};

U8Summary u8_summary(std::span<const uint8_t> v);
uint64_t u32_sum(std::span<const uint32_t> v);
double f64_sum(std::span<const double> v);
double f64_min(std::span<const double> v); // precondition: v non-empty
double f64_max(std::span<const double> v); // precondition: v non-empty

// Reference implementations, kept callable for equivalence tests.
namespace scalar {
U8Summary u8_summary(std::span<const uint8_t> v);
uint64_t u32_sum(std::span<const uint32_t> v);
double f64_sum(std::span<const double> v);
double f64_min(std::span<const double> v);
double f64_max(std::span<const double> v);
} // namespace scalar

#if defined(IOTWL_HAVE_AVX2)
namespace avx2 {
U8Summary u8_summary(std::span<const uint8_t> v);
uint64_t u32_sum(std::span<const uint32_t> v);
double f64_sum(std::span<const double> v);
double f64_min(std::span<const double> v);
double f64_max(std::span<const double> v);
} // namespace avx2
#endif

} // namespace iotwl::kernels
