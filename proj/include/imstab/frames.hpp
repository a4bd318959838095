#ifndef IMSTAB_FRAMES_HPP
#define IMSTAB_FRAMES_HPP

#include <functional>

#include <Eigen/Dense>

#include "imstab/errors.hpp"
#include "imstab/ratfun.hpp"

namespace imstab {

/// Modeling frame of a 2x2 channel pair: synchronous dq or positive/negative
/// sequence, with the fundamental frequency.
struct DomainTag {
    enum class Kind { dq, sequence };
    Kind kind = Kind::dq;
    double omega0 = 100.0 * 3.14159265358979323846;

    static DomainTag dq(double w0) { return {Kind::dq, w0}; }
    static DomainTag sequence(double w0) { return {Kind::sequence, w0}; }
    const char* name() const { return kind == Kind::dq ? "dq" : "sequence"; }
};

/// Power-invariant rotation between dq and sequence components.
/// Any consistent unitary choice preserves determinant loci and verdicts;
/// this one is fixed and documented so exported data is reproducible.
inline Eigen::Matrix2cd sequence_rotation() {
    const double r = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2cd t;
    t << Complex{r, 0.0}, Complex{0.0, r}, Complex{r, 0.0}, Complex{0.0, -r};
    return t;
}

/// Value-level rotation of a dq response matrix into sequence components.
inline Eigen::Matrix2cd rotate_dq_to_pn(const Eigen::Matrix2cd& h_dq) {
    const Eigen::Matrix2cd t = sequence_rotation();
    return t * h_dq * t.adjoint();  // unitary: inverse = adjoint
}

inline Eigen::Matrix2cd rotate_pn_to_dq(const Eigen::Matrix2cd& h_pn) {
    const Eigen::Matrix2cd t = sequence_rotation();
    return t.adjoint() * h_pn * t;
}

/// Sequence-domain response from a dq evaluator: rotation plus frequency
/// shift, H_pn(jw) = T H_dq(j(w - w0)) T^-1. Sequence-domain objects live at
/// the frequency-response level only.
inline std::function<Eigen::Matrix2cd(double)> dq_to_sequence_response(
    std::function<Eigen::Matrix2cd(double)> h_dq, double omega0) {
    return [h_dq = std::move(h_dq), omega0](double w) { return rotate_dq_to_pn(h_dq(w - omega0)); };
}

inline std::function<Eigen::Matrix2cd(double)> sequence_to_dq_response(
    std::function<Eigen::Matrix2cd(double)> h_pn, double omega0) {
    return [h_pn = std::move(h_pn), omega0](double w) { return rotate_pn_to_dq(h_pn(w + omega0)); };
}

struct SymmetryReport {
    double max_violation = 0.0;
    bool ok = true;
};

/// Checks the frame symmetry of a sampled response: dq responses of real-
/// coefficient models satisfy H(-w) = conj(H(w)); sequence responses are
/// conjugate-mirrored about omega0. Throws above the tolerance -- a violation
/// indicates a modeling bug, not a stability property.
inline SymmetryReport verify_symmetries(const std::function<Eigen::Matrix2cd(double)>& channel,
                                        const DomainTag& tag, const std::vector<double>& omegas,
                                        double tolerance = 1e-6) {
    SymmetryReport rep;
    const Eigen::Matrix2cd t = sequence_rotation();
    for (double w : omegas) {
        Eigen::Matrix2cd lhs, rhs;
        if (tag.kind == DomainTag::Kind::dq) {
            lhs = channel(-w);
            rhs = channel(w).conjugate();
        } else {
            lhs = channel(tag.omega0 - w);
            const Eigen::Matrix2cd x = channel(tag.omega0 + w);
            rhs = t * (t.adjoint() * x * t).conjugate() * t.adjoint();
        }
        const double scale = std::max(1.0, rhs.norm());
        rep.max_violation = std::max(rep.max_violation, (lhs - rhs).norm() / scale);
    }
    rep.ok = rep.max_violation <= tolerance;
    if (!rep.ok)
        throw SymmetryViolation("frame symmetry violated by " +
                                std::to_string(rep.max_violation));
    return rep;
}

/// Maximum deviation of det(I + R_pn) at j(w + w0) from det(I + R_dq) at jw
/// across the grid. The similarity transform leaves determinants invariant,
/// so the deviation measures only numerical noise of the mapping.
inline double det_shift_identity(const std::function<Eigen::Matrix2cd(double)>& r_dq,
                                 const std::vector<double>& omegas, double omega0) {
    auto r_pn = dq_to_sequence_response(r_dq, omega0);
    double worst = 0.0;
    for (double w : omegas) {
        const Complex det_dq = (Eigen::Matrix2cd::Identity() + r_dq(w)).determinant();
        const Complex det_pn = (Eigen::Matrix2cd::Identity() + r_pn(w + omega0)).determinant();
        const double scale = std::max(1.0, std::abs(det_dq));
        worst = std::max(worst, std::abs(det_pn - det_dq) / scale);
    }
    return worst;
}

}  // namespace imstab

#endif  // IMSTAB_FRAMES_HPP
