#ifndef IMSTAB_TESTS_SUPPORT_TEST_UTIL_HPP
#define IMSTAB_TESTS_SUPPORT_TEST_UTIL_HPP

#include <algorithm>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include "imstab/ratfun.hpp"

namespace testutil {

using imstab::Complex;

/// Independent coefficient-form Horner evaluation used as oracle for the
/// factored evaluation path.
inline Complex horner_eval(std::span<const double> coeffs, Complex s) {
    Complex acc = {0.0, 0.0};
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * s + coeffs[k];
    return acc;
}

/// Expands a root list into coefficients the straightforward way (oracle for
/// the library's scaled expansion).
inline std::vector<Complex> expand_roots(double gain, const std::vector<Complex>& roots) {
    std::vector<Complex> c = {Complex(gain, 0.0)};
    for (const Complex& r : roots) {
        std::vector<Complex> next(c.size() + 1, Complex(0.0, 0.0));
        for (std::size_t k = 0; k < c.size(); ++k) {
            next[k + 1] += c[k];
            next[k] -= c[k] * r;
        }
        c = std::move(next);
    }
    return c;
}

/// Multiset match with relative tolerance; greedy nearest pairing.
inline bool multisets_match(std::vector<Complex> a, std::vector<Complex> b, double rel_tol,
                            double* worst = nullptr) {
    if (a.size() != b.size()) return false;
    double w = 0.0;
    for (const Complex& x : a) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bj = b.size();
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double d = std::abs(x - b[j]);
            if (d < best) {
                best = d;
                bj = j;
            }
        }
        if (bj == b.size()) return false;
        const double scale = std::max(1.0, std::abs(x));
        w = std::max(w, best / scale);
        b.erase(b.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    if (worst) *worst = w;
    return w <= rel_tol;
}

inline std::mt19937& rng() {
    static std::mt19937 gen(0x5eed1234u);
    return gen;
}

inline double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng());
}

/// Random real polynomial with conjugate-symmetric roots of the given degree.
inline imstab::FactoredPoly random_real_poly(int degree, double radius = 3.0) {
    std::vector<Complex> roots;
    int remaining = degree;
    while (remaining > 0) {
        if (remaining >= 2 && uniform(0.0, 1.0) < 0.6) {
            const double re = uniform(-radius, radius);
            const double im = uniform(0.1, radius);
            roots.emplace_back(re, im);
            roots.emplace_back(re, -im);
            remaining -= 2;
        } else {
            roots.emplace_back(uniform(-radius, radius), 0.0);
            remaining -= 1;
        }
    }
    return imstab::FactoredPoly(uniform(0.5, 2.0) * (uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0),
                                std::move(roots));
}

inline imstab::RatFun random_ratfun(int num_deg, int den_deg, double radius = 3.0) {
    return imstab::RatFun(random_real_poly(num_deg, radius), random_real_poly(den_deg, radius));
}

}  // namespace testutil

#include "imstab/statespace.hpp"

namespace testutil {

/// Random strictly stable state-space system with the requested shape.
/// Eigenvalues of A are shifted left of -margin.
inline imstab::StateSpace random_stable_ss(int order, int inputs, int outputs,
                                           double margin = 0.05) {
    Eigen::MatrixXd A(order, order), B(order, inputs), C(outputs, order), D(outputs, inputs);
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j) A(i, j) = uniform(-1.0, 1.0);
    if (order > 0) {
        double max_re = -std::numeric_limits<double>::infinity();
        for (const auto& ev : imstab::eigenvalues(A)) max_re = std::max(max_re, ev.real());
        A -= (max_re + margin + uniform(0.0, 1.0)) * Eigen::MatrixXd::Identity(order, order);
    }
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < inputs; ++j) B(i, j) = uniform(-1.0, 1.0);
    for (int i = 0; i < outputs; ++i)
        for (int j = 0; j < order; ++j) C(i, j) = uniform(-1.0, 1.0);
    for (int i = 0; i < outputs; ++i)
        for (int j = 0; j < inputs; ++j) D(i, j) = uniform(-0.5, 0.5);
    return imstab::StateSpace(A, B, C, D);
}

/// Direct frequency-domain oracle: C (sI - A)^-1 B + D by complex linear solve.
inline Eigen::MatrixXcd freq_solve(const imstab::StateSpace& ss, Complex s) {
    const int n = ss.order();
    if (n == 0) return ss.D.cast<Complex>();
    Eigen::MatrixXcd M = s * Eigen::MatrixXcd::Identity(n, n) - ss.A.cast<Complex>();
    return ss.C.cast<Complex>() * M.partialPivLu().solve(ss.B.cast<Complex>()) +
           ss.D.cast<Complex>();
}

}  // namespace testutil

#endif
