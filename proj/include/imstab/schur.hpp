#ifndef IMSTAB_SCHUR_HPP
#define IMSTAB_SCHUR_HPP

#include "imstab/errors.hpp"
#include "imstab/ratfun.hpp"
#include "imstab/ratmatrix.hpp"

namespace imstab {

/// Scalar loop impedance of one physical frame with the other frame folded
/// in, plus its equivalent-side split. The numerator of loop_imp carries
/// system modes; the denominator may pick up right-half-plane roots even for
/// stable subsystems, which is why rhp_poles is reported explicitly.
struct LoopDecomposition {
    RatFun loop_imp;  // S_Z^f
    RatFun zc_eq;     // converter-side equivalent impedance Z_c^f
    RatFun zg_eq;     // grid-side equivalent impedance Z_g^f
    RatFun r1d;       // one-dimensional return ratio Z_g^f / Z_c^f
    int frame = 1;    // 1 or 2; domain binding (d/q or p/n) lives elsewhere
    RhpCensus rhp_poles;
};

/// Schur complement of a 2x2 rational matrix keeping the requested frame:
/// frame 1 keeps m11 - m12 m21 / m22, frame 2 the symmetric counterpart.
inline RatFun schur_complement(const RatMatrix& m, int keep, double tol = kTolCancel) {
    if (m.rows() != 2 || m.cols() != 2)
        throw DimensionMismatch("Schur complement needs a 2x2 matrix");
    if (keep != 1 && keep != 2) throw DimensionMismatch("frame index must be 1 or 2");
    const int k = keep - 1;
    const int e = 1 - k;
    const RatFun& elim = m.at(e, e);
    if (elim.is_zero())
        throw SingularEliminationBlock("eliminated diagonal entry is identically zero");
    const RatFun cross = rf_div(rf_mul(m.at(k, e), m.at(e, k), tol), elim, tol);
    return rf_sub(m.at(k, k), cross, tol);
}

/// Loop impedance S_Z^f of the sum S = Z_g + Z_c with the equivalent-side
/// split and the RHP pole census the criterion user must inspect.
inline LoopDecomposition loop_impedance(const RatMatrix& zg, const RatMatrix& zc, int frame,
                                        double tol = kTolCancel) {
    if (zg.rows() != 2 || zg.cols() != 2 || zc.rows() != 2 || zc.cols() != 2)
        throw DimensionMismatch("loop impedance needs 2x2 matrices");
    if (frame != 1 && frame != 2) throw DimensionMismatch("frame index must be 1 or 2");
    const RatMatrix s = rm_add(zg, zc, tol);
    const int k = frame - 1;
    const int e = 1 - k;
    const RatFun& denom = s.at(e, e);
    if (denom.is_zero())
        throw SingularEliminationBlock("eliminated frame sum is identically zero");

    LoopDecomposition out;
    out.frame = frame;
    out.loop_imp = schur_complement(s, frame, tol);
    const RatFun folded = rf_div(rf_add(zg.at(e, k), zc.at(e, k), tol), denom, tol);
    out.zc_eq = rf_sub(zc.at(k, k), rf_mul(zc.at(k, e), folded, tol), tol);
    out.zg_eq = rf_sub(zg.at(k, k), rf_mul(zg.at(k, e), folded, tol), tol);
    out.r1d = rf_div(out.zg_eq, out.zc_eq, tol);
    out.rhp_poles = rhp_census(out.loop_imp.den.roots);
    return out;
}

}  // namespace imstab

#endif  // IMSTAB_SCHUR_HPP
