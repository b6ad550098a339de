// AVX2 variants of the inner-loop kernels.  This translation unit is compiled
// with -mavx2 -mfma; it is only entered if the running CPU reports both.

#include "cmred/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace cmred::simd {

namespace {

// Complex values are interleaved (re,im) pairs; one __m256d holds two of them.

cplx cdot_avx2(const cplx* a, const cplx* b, std::size_t n)
{
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    // acc_p accumulates [ra*rb, ia*ib, ...]; acc_x accumulates [ra*ib, ia*rb, ...]
    __m256d acc_p0 = _mm256_setzero_pd(), acc_x0 = _mm256_setzero_pd();
    __m256d acc_p1 = _mm256_setzero_pd(), acc_x1 = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        __m256d va0 = _mm256_loadu_pd(pa + 2 * k);
        __m256d vb0 = _mm256_loadu_pd(pb + 2 * k);
        __m256d va1 = _mm256_loadu_pd(pa + 2 * k + 4);
        __m256d vb1 = _mm256_loadu_pd(pb + 2 * k + 4);
        acc_p0 = _mm256_fmadd_pd(va0, vb0, acc_p0);
        acc_x0 = _mm256_fmadd_pd(va0, _mm256_permute_pd(vb0, 0x5), acc_x0);
        acc_p1 = _mm256_fmadd_pd(va1, vb1, acc_p1);
        acc_x1 = _mm256_fmadd_pd(va1, _mm256_permute_pd(vb1, 0x5), acc_x1);
    }
    acc_p0 = _mm256_add_pd(acc_p0, acc_p1);
    acc_x0 = _mm256_add_pd(acc_x0, acc_x1);
    double p[4], x[4];
    _mm256_storeu_pd(p, acc_p0);
    _mm256_storeu_pd(x, acc_x0);
    double re = (p[0] - p[1]) + (p[2] - p[3]);
    double im = (x[0] + x[1]) + (x[2] + x[3]);
    for (; k < n; ++k) {
        re += a[k].real() * b[k].real() - a[k].imag() * b[k].imag();
        im += a[k].real() * b[k].imag() + a[k].imag() * b[k].real();
    }
    return {re, im};
}

void axpy_avx2(cplx alpha, const cplx* x, cplx* y, std::size_t n)
{
    const double* px = reinterpret_cast<const double*>(x);
    double* py = reinterpret_cast<double*>(y);
    const __m256d ar = _mm256_set1_pd(alpha.real());
    // [-ai, ai, -ai, ai] so that ar*xr - ai*xi / ar*xi + ai*xr come out of one fma pair
    const __m256d ai = _mm256_set_pd(alpha.imag(), -alpha.imag(), alpha.imag(), -alpha.imag());
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        __m256d vx = _mm256_loadu_pd(px + 2 * k);
        __m256d vy = _mm256_loadu_pd(py + 2 * k);
        __m256d t = _mm256_fmadd_pd(ai, _mm256_permute_pd(vx, 0x5), vy);
        t = _mm256_fmadd_pd(ar, vx, t);
        _mm256_storeu_pd(py + 2 * k, t);
    }
    for (; k < n; ++k) {
        const double xr = x[k].real(), xi = x[k].imag();
        y[k] += cplx{alpha.real() * xr - alpha.imag() * xi,
                     alpha.real() * xi + alpha.imag() * xr};
    }
}

double wabs_sum_avx2(const double* w, const cplx* x, std::size_t n)
{
    const double* px = reinterpret_cast<const double*>(x);
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        __m256d v0 = _mm256_loadu_pd(px + 2 * k);     // r0 i0 r1 i1
        __m256d v1 = _mm256_loadu_pd(px + 2 * k + 4); // r2 i2 r3 i3
        __m256d sq0 = _mm256_mul_pd(v0, v0);
        __m256d sq1 = _mm256_mul_pd(v1, v1);
        // r0^2+i0^2, r1^2+i1^2, r2^2+i2^2, r3^2+i3^2
        __m256d h = _mm256_hadd_pd(sq0, sq1);                     // lanes: [s0 s2 | s1 s3]
        h = _mm256_permute4x64_pd(h, _MM_SHUFFLE(3, 1, 2, 0));    // [s0 s1 s2 s3]
        __m256d mag = _mm256_sqrt_pd(h);
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + k), mag, acc);
    }
    double t[4];
    _mm256_storeu_pd(t, acc);
    double s = (t[0] + t[1]) + (t[2] + t[3]);
    for (; k < n; ++k) {
        const double re = x[k].real(), im = x[k].imag();
        s += w[k] * __builtin_sqrt(re * re + im * im);
    }
    return s;
}

const Ops avx2_ops{cdot_avx2, axpy_avx2, wabs_sum_avx2, "avx2"};

} // namespace

const Ops* avx2_ops_or_null()
{
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return &avx2_ops;
    return nullptr;
}

} // namespace cmred::simd

#else // compiler lacked AVX2/FMA flags for this TU

namespace cmred::simd {
const Ops* avx2_ops_or_null() { return nullptr; }
} // namespace cmred::simd

#endif
#else // not x86-64

namespace cmred::simd {
const Ops* avx2_ops_or_null() { return nullptr; }
} // namespace cmred::simd

#endif
