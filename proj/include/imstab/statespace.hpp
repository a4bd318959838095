#ifndef IMSTAB_STATESPACE_HPP
#define IMSTAB_STATESPACE_HPP

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "imstab/errors.hpp"
#include "imstab/ratfun.hpp"
#include "imstab/ratmatrix.hpp"

namespace imstab {

/// Continuous-time LTI state-space model. Immutable after construction in
/// spirit: operations return new values.
struct StateSpace {
    Eigen::MatrixXd A, B, C, D;
    std::vector<std::string> input_labels;
    std::vector<std::string> output_labels;

    StateSpace() = default;
    StateSpace(Eigen::MatrixXd a, Eigen::MatrixXd b, Eigen::MatrixXd c, Eigen::MatrixXd d,
               std::vector<std::string> in_labels = {}, std::vector<std::string> out_labels = {})
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)),
          input_labels(std::move(in_labels)), output_labels(std::move(out_labels)) {
        validate();
    }

    int order() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(D.cols()); }
    int outputs() const { return static_cast<int>(D.rows()); }

    void validate() const {
        if (A.rows() != A.cols()) throw DimensionMismatch("A must be square");
        if (B.rows() != A.rows()) throw DimensionMismatch("B row count must match A");
        if (C.cols() != A.cols()) throw DimensionMismatch("C column count must match A");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw DimensionMismatch("D must be outputs x inputs");
    }

    enum class Stability { Stable, Marginal, Unstable };

    /// Strict-stability gate: all eigenvalues in Re < -band, where
    /// band = margin * max(1, ||A||). Eigenvalues inside the band are
    /// reported as Marginal rather than silently passed.
    Stability stability(double margin = 1e-9) const {
        if (order() == 0) return Stability::Stable;
        const double band = margin * std::max(1.0, A.norm());
        Eigen::EigenSolver<Eigen::MatrixXd> solver(A, false);
        bool marginal = false;
        for (int i = 0; i < order(); ++i) {
            const double re = solver.eigenvalues()(i).real();
            if (re > band) return Stability::Unstable;
            if (re >= -band) marginal = true;
        }
        return marginal ? Stability::Marginal : Stability::Stable;
    }

    bool open_loop_stable(double margin = 1e-9) const {
        return stability(margin) == Stability::Stable;
    }
};

/// Dense eigensolve of a square real matrix.
inline std::vector<Complex> eigenvalues(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw NonSquare("eigenvalues of a non-square matrix");
    if (m.rows() == 0) return {};
    Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
    std::vector<Complex> out(static_cast<std::size_t>(m.rows()));
    for (int i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    return out;
}

/// Transfer function matrix C (sI - A)^-1 B + D via the Leverrier-Faddeev
/// recursion on the scaled state matrix. All entries share the (monic)
/// characteristic polynomial as denominator before cancellation, which is the
/// structural property the determinant-based criterion relies on.
inline RatMatrix transfer_matrix(const StateSpace& ss, double tol = kTolCancel) {
    ss.validate();
    const int n = ss.order();
    const int p = ss.outputs();
    const int q = ss.inputs();
    if (n == 0) {
        std::vector<RatFun> entries;
        entries.reserve(static_cast<std::size_t>(p * q));
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < q; ++j) entries.push_back(RatFun::constant(ss.D(i, j)));
        return RatMatrix::from_entries(p, q, std::move(entries), tol);
    }

    const double sigma = std::max(1.0, ss.A.cwiseAbs().rowwise().sum().maxCoeff());
    const Eigen::MatrixXd At = ss.A / sigma;

    // Faddeev-LeVerrier: chi(t) = t^n + c[n-1] t^(n-1) + ... + c[0],
    // adj(tI - At) = sum_k M_k t^(n-k), M_1 = I.
    std::vector<double> chi(static_cast<std::size_t>(n) + 1, 0.0);
    chi[static_cast<std::size_t>(n)] = 1.0;
    std::vector<Eigen::MatrixXd> M(static_cast<std::size_t>(n));
    M[0] = Eigen::MatrixXd::Identity(n, n);
    chi[static_cast<std::size_t>(n - 1)] = -(At * M[0]).trace();
    for (int k = 2; k <= n; ++k) {
        M[static_cast<std::size_t>(k - 1)] =
            At * M[static_cast<std::size_t>(k - 2)] +
            chi[static_cast<std::size_t>(n - k + 1)] * Eigen::MatrixXd::Identity(n, n);
        chi[static_cast<std::size_t>(n - k)] =
            -(At * M[static_cast<std::size_t>(k - 1)]).trace() / double(k);
    }

    std::vector<Complex> den_troots = roots_of(std::span<const double>(chi));
    std::vector<Complex> den_roots = den_troots;
    for (auto& r : den_roots) r *= sigma;
    const FactoredPoly den(1.0, den_roots);  // monic characteristic polynomial

    std::vector<RatFun> entries;
    entries.reserve(static_cast<std::size_t>(p * q));
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < q; ++j) {
            // numerator in t: (1/sigma) sum_k (C M_k B)_ij t^(n-k) + D_ij chi(t)
            std::vector<double> nt(static_cast<std::size_t>(n) + 1, 0.0);
            for (int k = 1; k <= n; ++k) {
                const double v = ss.C.row(i) * M[static_cast<std::size_t>(k - 1)] * ss.B.col(j);
                nt[static_cast<std::size_t>(n - k)] += v / sigma;
            }
            for (int k = 0; k <= n; ++k) nt[static_cast<std::size_t>(k)] += ss.D(i, j) * chi[static_cast<std::size_t>(k)];
            // map to s-space: coefficient of s^k is nt[k] * sigma^(n-k) after
            // monic-denominator normalization
            double cmax = 0.0;
            for (double v : nt) cmax = std::max(cmax, std::abs(v));
            if (cmax == 0.0) {
                entries.push_back(RatFun::zero());
                continue;
            }
            std::vector<double> trimmed = nt;
            while (trimmed.size() > 1 && std::abs(trimmed.back()) <= 1e-14 * cmax)
                trimmed.pop_back();
            const int d = static_cast<int>(trimmed.size()) - 1;
            FactoredPoly num;
            if (d == 0) {
                num = FactoredPoly::constant(trimmed[0] * std::pow(sigma, double(n)));
            } else {
                std::vector<Complex> nroots = roots_of(std::span<const double>(trimmed));
                for (auto& r : nroots) r *= sigma;
                num = FactoredPoly(trimmed.back() * std::pow(sigma, double(n - d)), std::move(nroots));
            }
            entries.push_back(cancel(RatFun(num, den), tol));
        }
    }
    RatMatrix out = RatMatrix::from_entries(p, q, std::move(entries), tol);
    return out;
}

/// Feedback interconnection u_g = y_c, u_c = -y_g of a grid-side impedance
/// model (current in, voltage out) and a converter-side admittance model
/// (voltage in, current out). The eigenvalues of the returned A matrix are
/// the closed-loop modes, i.e. the zeros of det(I + Z_g Y_c).
///
/// series_L, when non-empty, adds the improper series term s*L to the grid
/// impedance (an RL grid branch has no proper state-space realization on its
/// own; the loop current becomes a state of the interconnection instead).
inline StateSpace close_loop(const StateSpace& zg, const StateSpace& yc,
                             const Eigen::MatrixXd& series_L = Eigen::MatrixXd()) {
    zg.validate();
    yc.validate();
    const int m = zg.inputs();
    if (zg.outputs() != m || yc.inputs() != m || yc.outputs() != m)
        throw DimensionMismatch("channel counts of the two subsystems must match");
    const bool has_L = series_L.size() > 0 && series_L.norm() > 0.0;
    if (has_L && (series_L.rows() != m || series_L.cols() != m))
        throw DimensionMismatch("series inductance must be channels x channels");

    const int ng = zg.order();
    const int nc = yc.order();
    const auto& Ag = zg.A;
    const auto& Bg = zg.B;
    const auto& Cg = zg.C;
    const auto& Dg = zg.D;
    const auto& Ac = yc.A;
    const auto& Bc = yc.B;
    const auto& Cc = yc.C;
    const auto& Dc = yc.D;

    if (!has_L) {
        Eigen::MatrixXd loop = Eigen::MatrixXd::Identity(m, m) + Dc * Dg;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(loop);
        if (!lu.isInvertible()) throw AlgebraicLoop("singular direct-feedthrough loop I + Dc Dg");
        const Eigen::MatrixXd Phi = lu.inverse();
        Eigen::MatrixXd Acl(ng + nc, ng + nc);
        Acl.topLeftCorner(ng, ng) = Ag - Bg * Phi * Dc * Cg;
        Acl.topRightCorner(ng, nc) = Bg * Phi * Cc;
        Acl.bottomLeftCorner(nc, ng) = Bc * (Dg * Phi * Dc - Eigen::MatrixXd::Identity(m, m)) * Cg;
        Acl.bottomRightCorner(nc, nc) = Ac - Bc * Dg * Phi * Cc;
        return StateSpace(Acl, Eigen::MatrixXd::Zero(ng + nc, 0),
                          Eigen::MatrixXd::Zero(0, ng + nc), Eigen::MatrixXd::Zero(0, 0));
    }

    if (Dc.norm() == 0.0) {
        // Strictly proper converter: the loop current i = Cc x_c is already a
        // linear function of converter states; the converter input voltage is
        // algebraic.
        Eigen::MatrixXd W = Eigen::MatrixXd::Identity(m, m) + series_L * Cc * Bc;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
        if (!lu.isInvertible())
            throw AlgebraicLoop("singular loop I + L Cc Bc with series inductance");
        const Eigen::MatrixXd Wi = lu.inverse();
        const Eigen::MatrixXd K = Dg * Cc + series_L * Cc * Ac;  // m x nc
        Eigen::MatrixXd Acl(ng + nc, ng + nc);
        Acl.topLeftCorner(ng, ng) = Ag;
        Acl.topRightCorner(ng, nc) = Bg * Cc;
        Acl.bottomLeftCorner(nc, ng) = -Bc * Wi * Cg;
        Acl.bottomRightCorner(nc, nc) = Ac - Bc * Wi * K;
        return StateSpace(Acl, Eigen::MatrixXd::Zero(ng + nc, 0),
                          Eigen::MatrixXd::Zero(0, ng + nc), Eigen::MatrixXd::Zero(0, 0));
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(series_L * Dc);
    if (!lu.isInvertible())
        throw AlgebraicLoop("series inductance with singular converter feedthrough");
    const Eigen::MatrixXd LDi = lu.inverse();
    // The converter terminal voltage becomes a state (the series inductor
    // differentiates the loop current, which itself depends on that voltage).
    const int nx = ng + nc + m;
    Eigen::MatrixXd Acl = Eigen::MatrixXd::Zero(nx, nx);
    Acl.block(0, 0, ng, ng) = Ag;
    Acl.block(0, ng, ng, nc) = Bg * Cc;
    Acl.block(0, ng + nc, ng, m) = Bg * Dc;
    Acl.block(ng, ng, nc, nc) = Ac;
    Acl.block(ng, ng + nc, nc, m) = Bc;
    Acl.block(ng + nc, 0, m, ng) = -LDi * Cg;
    Acl.block(ng + nc, ng, m, nc) = -LDi * (Dg * Cc + series_L * Cc * Ac);
    Acl.block(ng + nc, ng + nc, m, m) =
        -LDi * (Eigen::MatrixXd::Identity(m, m) + Dg * Dc + series_L * Cc * Bc);
    return StateSpace(Acl, Eigen::MatrixXd::Zero(nx, 0), Eigen::MatrixXd::Zero(0, nx),
                      Eigen::MatrixXd::Zero(0, 0));
}

}  // namespace imstab

#endif  // IMSTAB_STATESPACE_HPP
