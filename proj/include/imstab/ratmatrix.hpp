#ifndef IMSTAB_RATMATRIX_HPP
#define IMSTAB_RATMATRIX_HPP

#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "imstab/errors.hpp"
#include "imstab/ratfun.hpp"

namespace imstab {

/// Matrix of rational functions with a cached least common denominator.
/// The common denominator view (numerator polynomial matrix over one
/// denominator) is what the determinant and Smith-McMillan machinery operate
/// on; per-entry rational functions remain the public representation.
class RatMatrix {
  public:
    RatMatrix() = default;
    RatMatrix(int rows, int cols)
        : rows_(rows), cols_(cols), entries_(static_cast<std::size_t>(rows * cols)) {
        common_den_ = FactoredPoly::one();
    }

    static RatMatrix from_entries(int rows, int cols, std::vector<RatFun> entries,
                                  double tol = kTolCancel) {
        RatMatrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.entries_ = std::move(entries);
        m.recompute_common_den(tol);
        return m;
    }

    static RatMatrix identity(int n) {
        RatMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = RatFun::one();
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    const RatFun& at(int i, int j) const {
        return entries_[static_cast<std::size_t>(i * cols_ + j)];
    }
    RatFun& at(int i, int j) { return entries_[static_cast<std::size_t>(i * cols_ + j)]; }

    const FactoredPoly& common_den() const { return common_den_; }

    /// Numerator of entry (i, j) over the common denominator:
    /// num_ij * (common_den / den_ij) as a factored product.
    FactoredPoly numerator_over_common(int i, int j, double tol = kTolCancel) const {
        const RatFun& e = at(i, j);
        const FactoredPoly quota = poly_divide_exact(
            FactoredPoly(1.0, common_den_.roots, common_den_.real_coeffs), e.den, tol);
        return poly_mul(e.num, quota);
    }

    Eigen::MatrixXcd eval(Complex s) const {
        Eigen::MatrixXcd v(rows_, cols_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) v(i, j) = rf_eval(at(i, j), s);
        return v;
    }

    /// Union of entry denominator roots (pole candidates of the matrix).
    std::vector<Complex> pole_candidates() const { return common_den_.roots; }

    void recompute_common_den(double tol = kTolCancel) {
        FactoredPoly lcm = FactoredPoly::one();
        for (const RatFun& e : entries_) lcm = poly_lcm(lcm, e.den, tol);
        lcm.gain = 1.0;
        common_den_ = lcm;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<RatFun> entries_;
    FactoredPoly common_den_;
};

inline RatMatrix rm_add(const RatMatrix& a, const RatMatrix& b, double tol = kTolCancel) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("matrix addition shape mismatch");
    std::vector<RatFun> out;
    out.reserve(static_cast<std::size_t>(a.rows() * a.cols()));
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.push_back(rf_add(a.at(i, j), b.at(i, j), tol));
    return RatMatrix::from_entries(a.rows(), a.cols(), std::move(out), tol);
}

inline RatMatrix rm_mul(const RatMatrix& a, const RatMatrix& b, double tol = kTolCancel) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matrix product shape mismatch");
    // Work over the shared denominators: entry (i,j) = sum_k NA_ik NB_kj / (DA DB).
    const FactoredPoly den = poly_mul(a.common_den(), b.common_den());
    std::vector<RatFun> out;
    out.reserve(static_cast<std::size_t>(a.rows() * b.cols()));
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < b.cols(); ++j) {
            std::vector<FactoredPoly> terms;
            std::vector<double> weights;
            for (int k = 0; k < a.cols(); ++k) {
                terms.push_back(poly_mul(a.numerator_over_common(i, k, tol),
                                         b.numerator_over_common(k, j, tol)));
                weights.push_back(1.0);
            }
            FactoredPoly num = poly_add(terms, weights);
            // Refine against the entry values of the factors themselves; the
            // shared-denominator expansion can be poorly conditioned at pole
            // copies that entered the term numerators.
            auto log_eval = [&](Complex s) -> detail::LogComplex {
                std::vector<detail::LogComplex> vals;
                for (int k = 0; k < a.cols(); ++k) {
                    const detail::LogComplex va = rf_eval_log(a.at(i, k), s);
                    const detail::LogComplex vb = rf_eval_log(b.at(k, j), s);
                    if (!std::isfinite(va.log_mag) || !std::isfinite(vb.log_mag)) continue;
                    vals.push_back({va.log_mag + vb.log_mag, va.arg + vb.arg});
                }
                detail::LogComplex sum = detail::sum_log(vals);
                if (!std::isfinite(sum.log_mag)) return sum;
                const detail::LogComplex d = den.eval_log(s);
                return {sum.log_mag + d.log_mag, sum.arg + d.arg};
            };
            std::vector<Complex> refined = num.roots;
            detail::aberth_refine(refined, log_eval);
            num = FactoredPoly(num.gain, std::move(refined), num.real_coeffs);
            out.push_back(cancel(RatFun(num, den), tol));
        }
    }
    return RatMatrix::from_entries(a.rows(), b.cols(), std::move(out), tol);
}

inline RatMatrix rm_identity_plus(const RatMatrix& a, double tol = kTolCancel) {
    if (a.rows() != a.cols()) throw NonSquare("identity shift of a non-square matrix");
    RatMatrix out = a;
    for (int i = 0; i < a.rows(); ++i) out.at(i, i) = rf_add(a.at(i, i), RatFun::one(), tol);
    out.recompute_common_den(tol);
    return out;
}

inline RatMatrix rm_scale(const RatMatrix& a, double k) {
    RatMatrix out = a;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.at(i, j) = rf_scale(out.at(i, j), k);
    return out;
}

namespace detail {

/// The numerator of a determinant over a common denominator D^n contains
/// exact copies of D's roots (det(M) D^n = modes * D-factor * const). Snap
/// refined numerator roots onto their denominator partners within the given
/// relative radius so the copies cancel exactly.
inline void snap_denominator_copies(std::vector<Complex>& num_roots,
                                    const std::vector<Complex>& den_roots, double radius) {
    std::vector<bool> taken(num_roots.size(), false);
    for (const Complex& p : den_roots) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = num_roots.size();
        for (std::size_t i = 0; i < num_roots.size(); ++i) {
            if (taken[i]) continue;
            const double d = std::abs(num_roots[i] - p);
            if (d < best) {
                best = d;
                bi = i;
            }
        }
        if (bi == num_roots.size()) break;
        if (best <= radius * std::max(1.0, std::abs(p))) {
            num_roots[bi] = p;
            taken[bi] = true;
        }
    }
}

}  // namespace detail

/// Determinant through the common-denominator numerator matrix: permutation
/// expansion of the numerator polynomials, one re-rooting at the end.
/// Practical for the 2x2..4x4 blocks used here.
inline RatFun rm_det(const RatMatrix& m, double tol = kTolCancel) {
    if (m.rows() != m.cols()) throw NonSquare("determinant of a non-square matrix");
    const int n = m.rows();
    if (n == 0) return RatFun::one();
    // Triangular matrices reduce to the product of the diagonal exactly.
    bool upper_zero = true, lower_zero = true;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i < j && !m.at(i, j).is_zero()) upper_zero = false;
            if (i > j && !m.at(i, j).is_zero()) lower_zero = false;
        }
    if (upper_zero || lower_zero) {
        RatFun out = RatFun::one();
        for (int i = 0; i < n; ++i) out = rf_mul(out, m.at(i, i), tol);
        return out;
    }
    std::vector<FactoredPoly> numerators(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            numerators[static_cast<std::size_t>(i * n + j)] = m.numerator_over_common(i, j, tol);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<FactoredPoly> terms;
    std::vector<double> weights;
    do {
        // permutation sign by counting inversions
        int inversions = 0;
        for (std::size_t i = 0; i < perm.size(); ++i)
            for (std::size_t j = i + 1; j < perm.size(); ++j)
                if (perm[i] > perm[j]) ++inversions;
        FactoredPoly prod = FactoredPoly::one();
        for (int i = 0; i < n; ++i)
            prod = poly_mul(prod, numerators[static_cast<std::size_t>(i * n + perm[static_cast<std::size_t>(i)])]);
        terms.push_back(prod);
        weights.push_back((inversions % 2 == 0) ? 1.0 : -1.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    FactoredPoly num = poly_add(terms, weights);
    FactoredPoly den = FactoredPoly::one();
    for (int i = 0; i < n; ++i) den = poly_mul(den, m.common_den());
    // Refine the numerator roots against det(M(s)) * D(s)^n evaluated from
    // the per-entry rational values, which avoids the deep cancellations the
    // common-denominator expansion suffers at pole copies.
    auto log_eval = [&](Complex s) -> detail::LogComplex {
        Eigen::MatrixXcd v(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) v(i, j) = rf_eval(m.at(i, j), s);
        const Complex dv = v.determinant();
        const double a = std::abs(dv);
        if (a == 0.0 || !std::isfinite(a)) return {};
        const detail::LogComplex dl = m.common_den().eval_log(s);
        return {std::log(a) + n * dl.log_mag, std::arg(dv) + n * dl.arg};
    };
    std::vector<Complex> refined = num.roots;
    detail::aberth_refine(refined, log_eval);
    detail::snap_denominator_copies(refined, den.roots, 50.0 * tol);
    num = FactoredPoly(num.gain, std::move(refined), num.real_coeffs);
    return cancel(RatFun(num, den), tol);
}

/// Inverse of a 2x2 rational matrix via the adjugate over the determinant.
inline RatMatrix invert_2x2(const RatMatrix& m, double tol = kTolCancel) {
    if (m.rows() != 2 || m.cols() != 2) throw DimensionMismatch("invert_2x2 needs a 2x2 matrix");
    const RatFun det = rm_det(m, tol);
    if (det.is_zero()) throw SingularMatrixFunction("matrix determinant is identically zero");
    const RatFun inv_det = rf_inv(det);
    std::vector<RatFun> out(4);
    out[0] = rf_mul(m.at(1, 1), inv_det, tol);
    out[1] = rf_scale(rf_mul(m.at(0, 1), inv_det, tol), -1.0);
    out[2] = rf_scale(rf_mul(m.at(1, 0), inv_det, tol), -1.0);
    out[3] = rf_mul(m.at(0, 0), inv_det, tol);
    return RatMatrix::from_entries(2, 2, std::move(out), tol);
}

}  // namespace imstab

#endif  // IMSTAB_RATMATRIX_HPP
