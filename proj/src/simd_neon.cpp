// NEON variants for aarch64.  float64x2_t holds one complex value.

#include "cmred/simd.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>
#include <cmath>

namespace cmred::simd {

namespace {

cplx cdot_neon(const cplx* a, const cplx* b, std::size_t n)
{
    const double* pa = reinterpret_cast<const double*>(a);
    const double* pb = reinterpret_cast<const double*>(b);
    float64x2_t acc_p0 = vdupq_n_f64(0.0), acc_x0 = vdupq_n_f64(0.0);
    float64x2_t acc_p1 = vdupq_n_f64(0.0), acc_x1 = vdupq_n_f64(0.0);
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        float64x2_t va0 = vld1q_f64(pa + 2 * k);
        float64x2_t vb0 = vld1q_f64(pb + 2 * k);
        float64x2_t va1 = vld1q_f64(pa + 2 * k + 2);
        float64x2_t vb1 = vld1q_f64(pb + 2 * k + 2);
        acc_p0 = vfmaq_f64(acc_p0, va0, vb0);
        acc_x0 = vfmaq_f64(acc_x0, va0, vextq_f64(vb0, vb0, 1));
        acc_p1 = vfmaq_f64(acc_p1, va1, vb1);
        acc_x1 = vfmaq_f64(acc_x1, va1, vextq_f64(vb1, vb1, 1));
    }
    acc_p0 = vaddq_f64(acc_p0, acc_p1);
    acc_x0 = vaddq_f64(acc_x0, acc_x1);
    double re = vgetq_lane_f64(acc_p0, 0) - vgetq_lane_f64(acc_p0, 1);
    double im = vgetq_lane_f64(acc_x0, 0) + vgetq_lane_f64(acc_x0, 1);
    for (; k < n; ++k) {
        re += a[k].real() * b[k].real() - a[k].imag() * b[k].imag();
        im += a[k].real() * b[k].imag() + a[k].imag() * b[k].real();
    }
    return {re, im};
}

void axpy_neon(cplx alpha, const cplx* x, cplx* y, std::size_t n)
{
    const double* px = reinterpret_cast<const double*>(x);
    double* py = reinterpret_cast<double*>(y);
    const float64x2_t ar = vdupq_n_f64(alpha.real());
    const double ai_arr[2] = {-alpha.imag(), alpha.imag()};
    const float64x2_t ai = vld1q_f64(ai_arr);
    std::size_t k = 0;
    for (; k < n; ++k) {
        float64x2_t vx = vld1q_f64(px + 2 * k);
        float64x2_t vy = vld1q_f64(py + 2 * k);
        float64x2_t t = vfmaq_f64(vy, ai, vextq_f64(vx, vx, 1));
        t = vfmaq_f64(t, ar, vx);
        vst1q_f64(py + 2 * k, t);
    }
}

double wabs_sum_neon(const double* w, const cplx* x, std::size_t n)
{
    double s = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double re = x[k].real(), im = x[k].imag();
        s += w[k] * std::sqrt(re * re + im * im);
    }
    return s;
}

const Ops neon_ops{cdot_neon, axpy_neon, wabs_sum_neon, "neon"};

} // namespace

const Ops* neon_ops_or_null() { return &neon_ops; }

} // namespace cmred::simd

#else

namespace cmred::simd {
const Ops* neon_ops_or_null() { return nullptr; }
} // namespace cmred::simd

#endif
