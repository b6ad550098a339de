#pragma once
// Small dense complex matrices (state dimensions here are tiny, m <= 4 in
// practice).  Row-major storage, no expression templates.

#include <complex>
#include <stdexcept>
#include <vector>

namespace cmred {

using cplx = std::complex<double>;
using Vecc = std::vector<cplx>;

class Matc {
public:
    Matc() = default;
    Matc(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols) {}

    static Matc identity(std::size_t n)
    {
        Matc m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    cplx& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

    Matc& operator+=(const Matc& o)
    {
        for (std::size_t k = 0; k < a_.size(); ++k)
            a_[k] += o.a_[k];
        return *this;
    }
    Matc& operator-=(const Matc& o)
    {
        for (std::size_t k = 0; k < a_.size(); ++k)
            a_[k] -= o.a_[k];
        return *this;
    }
    Matc& operator*=(cplx s)
    {
        for (auto& v : a_)
            v *= s;
        return *this;
    }

    Vecc operator*(const Vecc& x) const
    {
        Vecc y(r_, cplx{0.0});
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j)
                y[i] += (*this)(i, j) * x[j];
        return y;
    }

    const std::vector<cplx>& data() const { return a_; }

private:
    std::size_t r_ = 0, c_ = 0;
    std::vector<cplx> a_;
};

inline Matc operator*(const Matc& a, const Matc& b)
{
    Matc c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx av = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += av * b(k, j);
        }
    return c;
}

inline Matc operator-(Matc a, const Matc& b) { return a -= b; }
inline Matc operator+(Matc a, const Matc& b) { return a += b; }

double vec_norm(const Vecc& v);
cplx det(Matc a);

// Solves a x = b by partial-pivot LU; throws on (numerically) singular a.
Vecc solve(Matc a, Vecc b);

Matc inverse(const Matc& a);

// Unit right null vector of a nearly singular matrix, via full-pivot
// elimination; the residual |a v| is returned through *residual if given.
Vecc null_vector(Matc a, double* residual = nullptr);

// Spectral norm by power iteration on a^H a.
double spectral_norm(const Matc& a, double tol = 1e-10, int max_iter = 500);

} // namespace cmred
