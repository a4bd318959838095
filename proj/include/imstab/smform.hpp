#ifndef IMSTAB_SMFORM_HPP
#define IMSTAB_SMFORM_HPP

#include <array>
#include <vector>

#include "imstab/errors.hpp"
#include "imstab/ratfun.hpp"
#include "imstab/ratmatrix.hpp"

namespace imstab {

/// Smith-McMillan data of a square rational matrix: invariant factor pairs
/// eps_i / delta_i (monic), the minor GCD chain chi_i kept as evidence, and
/// the determinant gain.
///
/// Ordering convention: eps_i divides eps_{i+1} and delta_{i+1} divides
/// delta_i. Only the product of the constants in Eq-style determinant
/// factorizations is identifiable, so the full determinant gain is carried
/// in k[0] and k[i>0] = 1.
struct SmithMcMillan {
    std::vector<FactoredPoly> eps;
    std::vector<FactoredPoly> delta;
    std::vector<FactoredPoly> chi;  // chi[0] = 1, chi[i] = GCD of i x i minors
    std::vector<double> k;
    bool divisibility_chain_ok = true;
    bool reordered = false;
};

namespace detail {

/// Determinant of a k x k submatrix of factored numerator polynomials by
/// permutation expansion (k <= 4 in practice).
inline FactoredPoly minor_det(const std::vector<FactoredPoly>& nums, int n,
                              const std::vector<int>& rows, const std::vector<int>& cols) {
    const int k = static_cast<int>(rows.size());
    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<FactoredPoly> terms;
    std::vector<double> weights;
    do {
        int inversions = 0;
        for (std::size_t i = 0; i < perm.size(); ++i)
            for (std::size_t j = i + 1; j < perm.size(); ++j)
                if (perm[i] > perm[j]) ++inversions;
        FactoredPoly prod = FactoredPoly::one();
        bool zero = false;
        for (int i = 0; i < k && !zero; ++i) {
            const FactoredPoly& e =
                nums[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)] * n +
                                              cols[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])])];
            if (e.is_zero()) zero = true;
            prod = poly_mul(prod, e);
        }
        if (zero) continue;
        terms.push_back(prod);
        weights.push_back((inversions % 2 == 0) ? 1.0 : -1.0);
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (terms.empty()) return FactoredPoly::zero();
    return poly_add(terms, weights);
}

inline void combinations(int n, int k, std::vector<std::vector<int>>& out) {
    std::vector<int> idx(static_cast<std::size_t>(k));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        out.push_back(idx);
        int i = k - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
}

/// A probe point away from every root in the given sets.
inline Complex far_probe(const std::vector<const FactoredPoly*>& polys) {
    double radius = 1.0;
    for (const auto* p : polys)
        for (const Complex& r : p->roots) radius = std::max(radius, std::abs(r));
    radius *= 1.618;
    Complex best{radius, radius};
    double best_dist = -1.0;
    for (int k = 0; k < 16; ++k) {
        const double ang = 0.3 + 6.2831853 * k / 16.0;
        const Complex cand = radius * Complex(std::cos(ang), std::sin(ang));
        double dist = std::numeric_limits<double>::infinity();
        for (const auto* p : polys)
            for (const Complex& r : p->roots) dist = std::min(dist, std::abs(cand - r));
        if (dist > best_dist) {
            best_dist = dist;
            best = cand;
        }
    }
    return best;
}

inline bool divides_as_multiset(const FactoredPoly& a, const FactoredPoly& b, double tol) {
    // true when a's roots all appear in b within tolerance
    return poly_gcd(a, b, tol).degree() == a.degree();
}

}  // namespace detail

/// Smith-McMillan reduction. Implements the three textbook steps: factor out
/// the least common denominator, build the minor GCD chain chi_i of the
/// numerator polynomial matrix (root-multiset intersections), then cancel
/// diag(eps_i / D) down to diag(eps_i / delta_i).
inline SmithMcMillan smith_mcmillan(const RatMatrix& m, double tol = kTolCancel) {
    if (m.rows() != m.cols()) throw NonSquare("Smith-McMillan form needs a square matrix");
    const int n = m.rows();
    const FactoredPoly D(1.0, m.common_den().roots, m.common_den().real_coeffs);

    std::vector<FactoredPoly> nums(static_cast<std::size_t>(n * n));
    bool all_zero = true;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            nums[static_cast<std::size_t>(i * n + j)] = m.numerator_over_common(i, j, tol);
            if (!nums[static_cast<std::size_t>(i * n + j)].is_zero()) all_zero = false;
        }
    }
    if (all_zero) throw ZeroMatrix("all entries are identically zero");

    SmithMcMillan sm;
    sm.chi.push_back(FactoredPoly::one());
    for (int size = 1; size <= n; ++size) {
        std::vector<std::vector<int>> row_sets, col_sets;
        detail::combinations(n, size, row_sets);
        detail::combinations(n, size, col_sets);
        bool have = false;
        FactoredPoly g = FactoredPoly::zero();
        for (const auto& rs : row_sets) {
            for (const auto& cs : col_sets) {
                FactoredPoly d = detail::minor_det(nums, n, rs, cs);
                if (d.is_zero()) continue;
                d.gain = 1.0;
                g = have ? poly_gcd(g, d, tol) : d;
                have = true;
                if (g.degree() == 0) break;
            }
            if (have && g.degree() == 0) break;
        }
        sm.chi.push_back(have ? g : FactoredPoly::zero());
    }

    for (int i = 1; i <= n; ++i) {
        const FactoredPoly& hi = sm.chi[static_cast<std::size_t>(i)];
        const FactoredPoly& lo = sm.chi[static_cast<std::size_t>(i - 1)];
        if (hi.is_zero()) {
            sm.eps.push_back(FactoredPoly::zero());
            sm.delta.push_back(FactoredPoly::one());
            continue;
        }
        FactoredPoly eps_i = poly_divide_exact(hi, lo, tol);
        eps_i.gain = 1.0;
        const RatFun reduced = cancel(RatFun(eps_i, D), tol);
        FactoredPoly e = reduced.num;
        e.gain = 1.0;
        FactoredPoly d = reduced.den;
        d.gain = 1.0;
        sm.eps.push_back(e);
        sm.delta.push_back(d);
    }

    // Divisibility chain: eps_i | eps_{i+1}, delta_{i+1} | delta_i. A swap of
    // adjacent pairs repairs tolerance-induced misorderings.
    for (int i = 0; i + 1 < n; ++i) {
        const bool ok =
            detail::divides_as_multiset(sm.eps[static_cast<std::size_t>(i)],
                                        sm.eps[static_cast<std::size_t>(i + 1)], tol) &&
            detail::divides_as_multiset(sm.delta[static_cast<std::size_t>(i + 1)],
                                        sm.delta[static_cast<std::size_t>(i)], tol);
        if (!ok) {
            std::swap(sm.eps[static_cast<std::size_t>(i)], sm.eps[static_cast<std::size_t>(i + 1)]);
            std::swap(sm.delta[static_cast<std::size_t>(i)],
                      sm.delta[static_cast<std::size_t>(i + 1)]);
            sm.reordered = true;
            const bool fixed =
                detail::divides_as_multiset(sm.eps[static_cast<std::size_t>(i)],
                                            sm.eps[static_cast<std::size_t>(i + 1)], tol) &&
                detail::divides_as_multiset(sm.delta[static_cast<std::size_t>(i + 1)],
                                            sm.delta[static_cast<std::size_t>(i)], tol);
            if (!fixed) sm.divisibility_chain_ok = false;
        }
    }

    // Determinant gain at a probe point away from all roots.
    std::vector<const FactoredPoly*> ptrs;
    for (const auto& e : sm.eps) ptrs.push_back(&e);
    for (const auto& d : sm.delta) ptrs.push_back(&d);
    ptrs.push_back(&D);
    const Complex s0 = detail::far_probe(ptrs);
    Complex det_probe{1.0, 0.0};
    {
        Eigen::MatrixXcd v = m.eval(s0);
        det_probe = v.determinant();
    }
    Complex sm_probe{1.0, 0.0};
    for (int i = 0; i < n; ++i) {
        sm_probe *= sm.eps[static_cast<std::size_t>(i)].eval(s0) /
                    sm.delta[static_cast<std::size_t>(i)].eval(s0);
    }
    sm.k.assign(static_cast<std::size_t>(n), 1.0);
    if (std::abs(sm_probe) > 0.0) sm.k[0] = (det_probe / sm_probe).real();
    return sm;
}

/// Matrix zeros and poles from the Smith-McMillan invariant factors.
inline std::pair<std::vector<Complex>, std::vector<Complex>> matrix_zeros_poles(
    const SmithMcMillan& sm) {
    std::vector<Complex> zeros, poles;
    for (const auto& e : sm.eps) zeros.insert(zeros.end(), e.roots.begin(), e.roots.end());
    for (const auto& d : sm.delta) poles.insert(poles.end(), d.roots.begin(), d.roots.end());
    return {zeros, poles};
}

/// Determinant reconstructed from the Smith-McMillan data: k * prod eps/delta.
inline RatFun det_from_smith_mcmillan(const SmithMcMillan& sm, double tol = kTolCancel) {
    FactoredPoly num = FactoredPoly::constant(sm.k.empty() ? 1.0 : sm.k[0]);
    FactoredPoly den = FactoredPoly::one();
    for (const auto& e : sm.eps) num = poly_mul(num, e);
    for (const auto& d : sm.delta) den = poly_mul(den, d);
    return cancel(RatFun(num, den), tol);
}

/// det(I + Z_g Y_c) through the common-denominator numerator matrix:
/// det(D I + N) / D^n with a single final re-rooting. For stable subsystem
/// pairs the result carries no RHP pole after cancellation.
inline RatFun det_return_ratio(const RatMatrix& zg, const RatMatrix& yc,
                               double tol = kTolCancel) {
    if (zg.cols() != yc.rows() || zg.rows() != yc.cols())
        throw DimensionMismatch("return ratio factors must be conformable");
    const RatMatrix r = rm_mul(zg, yc, tol);
    const int n = r.rows();
    const FactoredPoly D(1.0, r.common_den().roots, r.common_den().real_coeffs);
    if (n == 2 && (r.at(0, 1).is_zero() || r.at(1, 0).is_zero())) {
        return rf_mul(rf_add(RatFun::one(), r.at(0, 0), tol),
                      rf_add(RatFun::one(), r.at(1, 1), tol), tol);
    }
    if (n == 2) {
        const FactoredPoly n11 = r.numerator_over_common(0, 0, tol);
        const FactoredPoly n12 = r.numerator_over_common(0, 1, tol);
        const FactoredPoly n21 = r.numerator_over_common(1, 0, tol);
        const FactoredPoly n22 = r.numerator_over_common(1, 1, tol);
        // (D + N11)(D + N22) - N12 N21, expanded termwise
        const FactoredPoly terms[5] = {poly_mul(D, D), poly_mul(D, n11), poly_mul(D, n22),
                                       poly_mul(n11, n22), poly_mul(n12, n21)};
        const double w[5] = {1.0, 1.0, 1.0, 1.0, -1.0};
        FactoredPoly num =
            poly_add(std::span<const FactoredPoly>(terms, 5), std::span<const double>(w, 5));
        // Refine against det(I + Zg(s) Yc(s)) computed from the original
        // factor matrices; the assembled coefficients cannot resolve
        // closed-loop modes that sit near open-loop pole copies.
        auto log_eval = [&](Complex s) -> detail::LogComplex {
            const Eigen::MatrixXcd v =
                Eigen::MatrixXcd::Identity(2, 2) + zg.eval(s) * yc.eval(s);
            const Complex dv = v.determinant();
            const double a = std::abs(dv);
            if (a == 0.0 || !std::isfinite(a)) return {};
            const detail::LogComplex dl = D.eval_log(s);
            return {std::log(a) + 2.0 * dl.log_mag, std::arg(dv) + 2.0 * dl.arg};
        };
        std::vector<Complex> refined = num.roots;
        detail::aberth_refine(refined, log_eval);
        const FactoredPoly den2 = poly_mul(D, D);
        detail::snap_denominator_copies(refined, den2.roots, 50.0 * tol);
        num = FactoredPoly(num.gain, std::move(refined), num.real_coeffs);
        return cancel(RatFun(num, den2), tol);
    }
    return rm_det(rm_identity_plus(r, tol), tol);
}

/// Determinants of the return differences S_Z = Z_g + Z_c, S_Y = Y_g + Y_c
/// and of I + R'_ZY with R'_ZY = Z_c Y_g. All three share the zero multiset
/// of det(I + R_ZY); their pole multisets may differ and are reported as-is.
struct ReturnDifferenceDets {
    RatFun det_sz;
    RatFun det_sy;
    RatFun det_r_alt;
};

inline ReturnDifferenceDets det_return_differences(const RatMatrix& zg, const RatMatrix& zc,
                                                   const RatMatrix& yg, const RatMatrix& yc,
                                                   double tol = kTolCancel) {
    ReturnDifferenceDets out;
    out.det_sz = rm_det(rm_add(zg, zc, tol), tol);
    out.det_sy = rm_det(rm_add(yg, yc, tol), tol);
    out.det_r_alt = det_return_ratio(zc, yg, tol);
    return out;
}

}  // namespace imstab

#endif  // IMSTAB_SMFORM_HPP
