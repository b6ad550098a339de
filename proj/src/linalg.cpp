#include "cmred/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace cmred {

double vec_norm(const Vecc& v)
{
    double s = 0;
    for (const auto& z : v)
        s += std::norm(z);
    return std::sqrt(s);
}

cplx det(Matc a)
{
    const std::size_t n = a.rows();
    if (n != a.cols())
        throw std::invalid_argument("det: matrix not square");
    cplx d = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                piv = i;
            }
        if (best == 0.0)
            return 0.0;
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(piv, j));
            d = -d;
        }
        d *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j)
                a(i, j) -= f * a(k, j);
        }
    }
    return d;
}

Vecc solve(Matc a, Vecc b)
{
    const std::size_t n = a.rows();
    if (n != a.cols() || b.size() != n)
        throw std::invalid_argument("solve: shape mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                piv = i;
            }
        if (best < 1e-300)
            throw std::runtime_error("solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j)
                a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    Vecc x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        cplx s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j)
            s -= a(ii, j) * x[j];
        x[ii] = s / a(ii, ii);
    }
    return x;
}

Matc inverse(const Matc& a)
{
    const std::size_t n = a.rows();
    Matc inv(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        Vecc e(n, cplx{0.0});
        e[j] = 1.0;
        Vecc col = solve(a, std::move(e));
        for (std::size_t i = 0; i < n; ++i)
            inv(i, j) = col[i];
    }
    return inv;
}

Vecc null_vector(Matc a, double* residual)
{
    const Matc orig = a;
    const std::size_t n = a.rows();
    std::vector<std::size_t> colperm(n);
    for (std::size_t j = 0; j < n; ++j)
        colperm[j] = j;

    // full-pivot elimination; the last pivot is the (near-)zero one
    for (std::size_t k = 0; k + 1 < n; ++k) {
        std::size_t pr = k, pc = k;
        double best = -1;
        for (std::size_t i = k; i < n; ++i)
            for (std::size_t j = k; j < n; ++j)
                if (std::abs(a(i, j)) > best) {
                    best = std::abs(a(i, j));
                    pr = i;
                    pc = j;
                }
        if (pr != k)
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(pr, j));
        if (pc != k) {
            for (std::size_t i = 0; i < n; ++i)
                std::swap(a(i, k), a(i, pc));
            std::swap(colperm[k], colperm[pc]);
        }
        if (std::abs(a(k, k)) < 1e-300)
            break;
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j)
                a(i, j) -= f * a(k, j);
        }
    }

    // back substitution with the free variable pinned to 1
    Vecc y(n, cplx{0.0});
    y[n - 1] = 1.0;
    for (std::size_t ii = n - 1; ii-- > 0;) {
        cplx s = 0.0;
        for (std::size_t j = ii + 1; j < n; ++j)
            s -= a(ii, j) * y[j];
        y[ii] = s / a(ii, ii);
    }
    Vecc v(n);
    for (std::size_t j = 0; j < n; ++j)
        v[colperm[j]] = y[j];
    const double nv = vec_norm(v);
    for (auto& z : v)
        z /= nv;
    if (residual)
        *residual = vec_norm(orig * v);
    return v;
}

double spectral_norm(const Matc& a, double tol, int max_iter)
{
    const std::size_t n = a.cols();
    if (n == 0)
        return 0.0;
    if (n == 1 && a.rows() == 1)
        return std::abs(a(0, 0));
    Vecc v(n);
    for (std::size_t j = 0; j < n; ++j)
        v[j] = cplx{1.0 / std::sqrt(double(n)), 0.3 * double(j + 1) / double(n)};
    double nv = vec_norm(v);
    for (auto& z : v)
        z /= nv;
    double prev = 0;
    for (int it = 0; it < max_iter; ++it) {
        // w = a^H (a v)
        Vecc av(a.rows(), cplx{0.0});
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j)
                av[i] += a(i, j) * v[j];
        Vecc w(n, cplx{0.0});
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < n; ++j)
                w[j] += std::conj(a(i, j)) * av[i];
        const double nw = vec_norm(w);
        if (nw == 0.0)
            return 0.0;
        const double sigma = std::sqrt(nw);
        for (std::size_t j = 0; j < n; ++j)
            v[j] = w[j] / nw;
        if (std::abs(sigma - prev) <= tol * std::max(1.0, sigma))
            return sigma;
        prev = sigma;
    }
    return prev;
}

} // namespace cmred
