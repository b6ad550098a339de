#include "cmred/simd.hpp"

#include <cmath>

namespace cmred::simd {

namespace {

cplx cdot_scalar(const cplx* a, const cplx* b, std::size_t n)
{
    // two accumulators so the scalar path has the same summation depth
    // characteristics as the vector paths
    double re0 = 0, im0 = 0, re1 = 0, im1 = 0;
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        re0 += a[k].real() * b[k].real() - a[k].imag() * b[k].imag();
        im0 += a[k].real() * b[k].imag() + a[k].imag() * b[k].real();
        re1 += a[k + 1].real() * b[k + 1].real() - a[k + 1].imag() * b[k + 1].imag();
        im1 += a[k + 1].real() * b[k + 1].imag() + a[k + 1].imag() * b[k + 1].real();
    }
    for (; k < n; ++k) {
        re0 += a[k].real() * b[k].real() - a[k].imag() * b[k].imag();
        im0 += a[k].real() * b[k].imag() + a[k].imag() * b[k].real();
    }
    return {re0 + re1, im0 + im1};
}

void axpy_scalar(cplx alpha, const cplx* x, cplx* y, std::size_t n)
{
    const double ar = alpha.real(), ai = alpha.imag();
    for (std::size_t k = 0; k < n; ++k) {
        const double xr = x[k].real(), xi = x[k].imag();
        y[k] += cplx{ar * xr - ai * xi, ar * xi + ai * xr};
    }
}

double wabs_sum_scalar(const double* w, const cplx* x, std::size_t n)
{
    double s0 = 0, s1 = 0;
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        s0 += w[k] * std::sqrt(x[k].real() * x[k].real() + x[k].imag() * x[k].imag());
        s1 += w[k + 1] * std::sqrt(x[k + 1].real() * x[k + 1].real() + x[k + 1].imag() * x[k + 1].imag());
    }
    for (; k < n; ++k)
        s0 += w[k] * std::sqrt(x[k].real() * x[k].real() + x[k].imag() * x[k].imag());
    return s0 + s1;
}

} // namespace

const Ops scalar_ops{cdot_scalar, axpy_scalar, wabs_sum_scalar, "scalar"};

} // namespace cmred::simd
