#pragma once
// Vectorized primitives for the quadrature and convolution inner loops.
//
// Every kernel has a scalar reference implementation plus, where the target
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant.  The backend is
// chosen once at startup from CPU capabilities; the CMRED_SIMD environment
// variable ("scalar", "avx2", "neon") or select_backend() overrides it.
// All variants are equivalence-tested against the scalar reference.

#include <complex>
#include <cstddef>
#include <string_view>

namespace cmred::simd {

using cplx = std::complex<double>;

struct Ops {
    // sum_k a[k] * b[k]   (no conjugation)
    cplx (*cdot)(const cplx* a, const cplx* b, std::size_t n);
    // y[k] += alpha * x[k]
    void (*axpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
    // sum_k w[k] * |x[k]|
    double (*wabs_sum)(const double* w, const cplx* x, std::size_t n);
    const char* name;
};

const Ops& ops();
const char* backend_name();
bool select_backend(std::string_view name);

inline cplx cdot(const cplx* a, const cplx* b, std::size_t n) { return ops().cdot(a, b, n); }
inline void axpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) { ops().axpy(alpha, x, y, n); }
inline double wabs_sum(const double* w, const cplx* x, std::size_t n) { return ops().wabs_sum(w, x, n); }

// Individual backends, exposed for the equivalence tests.
extern const Ops scalar_ops;
extern const Ops* avx2_ops_or_null();
extern const Ops* neon_ops_or_null();

} // namespace cmred::simd
