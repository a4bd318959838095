#ifndef IMSTAB_CRITERIA_HPP
#define IMSTAB_CRITERIA_HPP

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "imstab/errors.hpp"
#include "imstab/ratfun.hpp"
#include "imstab/ratmatrix.hpp"
#include "imstab/smform.hpp"

namespace imstab {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Ordered frequency grid in rad/s. Symmetric grids cover [-w_max, w_max]
/// for full-locus Nyquist sweeps.
struct FreqGrid {
    std::vector<double> omega;
    double base_step_hz = 0.0;
    int refined_points = 0;

    static FreqGrid linear(double f_min_hz, double f_max_hz, double step_hz) {
        if (!(f_min_hz < f_max_hz) || !(step_hz > 0.0))
            throw ConfigError("frequency grid needs f_min < f_max and step > 0");
        FreqGrid g;
        g.base_step_hz = step_hz;
        const long n = std::lround((f_max_hz - f_min_hz) / step_hz);
        g.omega.reserve(static_cast<std::size_t>(n + 1));
        for (long k = 0; k <= n; ++k) g.omega.push_back(kTwoPi * (f_min_hz + k * step_hz));
        return g;
    }

    static FreqGrid symmetric(double f_max_hz, double step_hz) {
        return linear(-f_max_hz, f_max_hz, step_hz);
    }
};

/// Sampled complex locus over a frequency grid.
struct Locus {
    std::vector<double> omega;
    std::vector<Complex> values;
    bool closed = false;          // closure at infinity appended conceptually
    bool low_confidence = false;  // refinement budget exhausted
    double min_abs = std::numeric_limits<double>::infinity();
    std::string channel;
    std::string domain;
};

enum class Verdict { Stable, Unstable, Indeterminate, Marginal };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Stable: return "Stable";
        case Verdict::Unstable: return "Unstable";
        case Verdict::Indeterminate: return "Indeterminate";
        case Verdict::Marginal: return "Marginal";
    }
    return "?";
}

/// One identified mode from the logarithmic-derivative criterion.
/// alpha_z > 0 marks an unstable mode; alpha_z = -1 / im_extreme per the
/// extremum relation of the separated imaginary part.
struct ModeEstimate {
    double omega_z = 0.0;     // rad/s
    double alpha_z = 0.0;     // 1/s
    double im_extreme = 0.0;  // interpolated extremum of Im[D_L]
    double re_slope = 0.0;    // slope of Re[D_L] at the crossing
    double quality = 0.0;     // residual of the local two-parameter model fit
    bool unstable = false;
    std::string channel;
    std::string domain;
};

/// Verdict plus the argument-principle evidence behind it. Encirclements are
/// counter-clockwise positive; clockwise encirclements appear negative.
struct StabilityReport {
    Verdict verdict = Verdict::Indeterminate;
    int encirclements_ccw = 0;
    int rhp_open_loop_poles = 0;    // P
    int rhp_closed_loop_zeros = 0;  // Z = N_cw + P
    std::string criterion;
    std::string domain;
    std::string indeterminate_reason;
    std::vector<std::string> caveats;
    std::vector<std::string> evidence;
    std::vector<ModeEstimate> modes;
};

/// Sweeps a scalar channel over the grid with adaptive bisection where the
/// phase turns fast or the locus passes near the origin. Refinement stops at
/// a minimum spacing of 1e-4 Hz or when the point budget is exhausted (the
/// locus is then flagged low-confidence).
inline Locus sweep(const std::function<Complex(double)>& channel, const FreqGrid& grid,
                   double origin_guard = 0.0, int budget = 200000) {
    constexpr double kMaxPhaseStep = 0.5235987755982988;  // 30 degrees
    const double min_spacing = kTwoPi * 1e-4;
    Locus locus;
    if (grid.omega.empty()) return locus;
    std::vector<std::pair<double, Complex>> pts;
    pts.reserve(grid.omega.size());
    for (double w : grid.omega) pts.emplace_back(w, channel(w));

    // median magnitude for the default origin guard
    if (origin_guard <= 0.0) {
        std::vector<double> mags;
        mags.reserve(pts.size());
        for (const auto& p : pts) mags.push_back(std::abs(p.second));
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2),
                         mags.end());
        origin_guard = 1e-6 * mags[mags.size() / 2];
    }

    int spent = 0;
    std::size_t i = 0;
    while (i + 1 < pts.size()) {
        const auto& [w0, v0] = pts[i];
        const auto& [w1, v1] = pts[i + 1];
        const double dphase = std::abs(std::remainder(std::arg(v1) - std::arg(v0), kTwoPi));
        const bool near_origin =
            std::min(std::abs(v0), std::abs(v1)) < 10.0 * origin_guard && origin_guard > 0.0;
        if ((dphase > kMaxPhaseStep || near_origin) && (w1 - w0) > min_spacing) {
            if (spent >= budget) {
                locus.low_confidence = true;
                ++i;
                continue;
            }
            const double wm = 0.5 * (w0 + w1);
            pts.insert(pts.begin() + static_cast<std::ptrdiff_t>(i) + 1, {wm, channel(wm)});
            ++spent;
            continue;  // re-examine the left half
        }
        ++i;
    }

    locus.omega.reserve(pts.size());
    locus.values.reserve(pts.size());
    for (const auto& [w, v] : pts) {
        locus.omega.push_back(w);
        locus.values.push_back(v);
        locus.min_abs = std::min(locus.min_abs, std::abs(v));
    }
    return locus;
}

inline Locus sweep(const RatFun& rf, const FreqGrid& grid, double origin_guard = 0.0,
                   int budget = 200000) {
    return sweep([&rf](double w) { return rf_eval(rf, Complex{0.0, w}); }, grid, origin_guard,
                 budget);
}

/// Net winding number of a sampled locus about a point, counter-clockwise
/// positive. With closure_half_turns_ccw == 0 the last sample connects back
/// to the first (biproper channels settle at a finite limit, the closure arc
/// adds nothing). A strictly proper channel of relative degree k pinches into
/// the origin at both band ends; its right-half-plane closure arc adds k
/// half-turns counter-clockwise, passed by the caller.
inline int winding_number(const Locus& locus, Complex about, int closure_half_turns_ccw = 0,
                          double origin_guard = 0.0) {
    const std::size_t n = locus.values.size();
    if (n < 3) throw UnresolvedWinding("locus has too few samples");
    double guard = origin_guard;
    if (guard <= 0.0) {
        std::vector<double> mags;
        mags.reserve(n);
        for (const auto& v : locus.values) mags.push_back(std::abs(v - about));
        std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(n / 2), mags.end());
        guard = 1e-6 * mags[n / 2];
    }
    const bool wrap = closure_half_turns_ccw == 0;
    double total = 0.0;
    const std::size_t segments = wrap ? n : n - 1;
    for (std::size_t i = 0; i < segments; ++i) {
        const Complex a = locus.values[i] - about;
        const Complex b = locus.values[(i + 1) % n] - about;
        if (std::abs(a) <= guard) throw OriginPass("locus passes through the reference point");
        total += std::arg(b / a);
    }
    total += closure_half_turns_ccw * 0.5 * kTwoPi;
    const double turns = total / kTwoPi;
    const double rounded = std::round(turns);
    if (std::abs(turns - rounded) > 0.15)
        throw UnresolvedWinding("winding residue " + std::to_string(turns - rounded) +
                                "; refine the grid");
    return static_cast<int>(rounded);
}

/// RHP pole census of a transfer matrix from its common-denominator roots,
/// with the marginal band reported separately.
inline RhpCensus matrix_rhp_pole_census(const RatMatrix& m) {
    return rhp_census(m.pole_candidates());
}

namespace detail {

/// Symmetric locus of a real-coefficient channel: evaluates the non-negative
/// frequencies and mirrors the conjugate values onto the negative half.
inline Locus symmetric_sweep(const std::function<Complex(double)>& channel, const FreqGrid& grid,
                             double origin_guard = 0.0) {
    FreqGrid half;
    half.base_step_hz = grid.base_step_hz;
    for (double w : grid.omega)
        if (w >= 0.0) half.omega.push_back(w);
    Locus pos = sweep(channel, half, origin_guard);
    Locus full;
    full.low_confidence = pos.low_confidence;
    full.closed = true;
    for (std::size_t i = pos.omega.size(); i-- > 1;) {
        full.omega.push_back(-pos.omega[i]);
        full.values.push_back(std::conj(pos.values[i]));
    }
    for (std::size_t i = 0; i < pos.omega.size(); ++i) {
        full.omega.push_back(pos.omega[i]);
        full.values.push_back(pos.values[i]);
    }
    for (const auto& v : full.values) full.min_abs = std::min(full.min_abs, std::abs(v));
    return full;
}

}  // namespace detail

/// Determinant-based criterion: the full Nyquist locus of det(I + Z_g Y_c)
/// over the symmetric grid. Both subsystems must be open-loop stable (the
/// standing premise of the impedance-based method); P = 0 then holds by the
/// no-RHP-pole theorem and the verdict is Stable iff the locus does not
/// encircle the origin.
inline StabilityReport determinant_criterion(const RatMatrix& zg, const RatMatrix& yc,
                                             const FreqGrid& grid, double tol = kTolCancel) {
    const RhpCensus zg_census = matrix_rhp_pole_census(zg);
    const RhpCensus yc_census = matrix_rhp_pole_census(yc);
    if (zg_census.rhp > 0 || yc_census.rhp > 0)
        throw OpenLoopUnstable("subsystem carries a right-half-plane pole");

    StabilityReport rep;
    rep.criterion = "determinant";
    if (zg_census.marginal > 0 || yc_census.marginal > 0) {
        rep.verdict = Verdict::Marginal;
        rep.indeterminate_reason = "subsystem pole on the marginal band";
        return rep;
    }

    const RatFun det = det_return_ratio(zg, yc, tol);
    const RhpCensus det_poles = rhp_census(det.den.roots);
    rep.rhp_open_loop_poles = det_poles.rhp;  // zero by theorem

    const Locus locus = detail::symmetric_sweep(
        [&det](double w) { return rf_eval(det, Complex{0.0, w}); }, grid);
    const int w_ccw = winding_number(locus, {0.0, 0.0});
    rep.encirclements_ccw = w_ccw;
    const int clockwise = -w_ccw;
    rep.rhp_closed_loop_zeros = clockwise + rep.rhp_open_loop_poles;

    if (det_poles.rhp > 0) {
        // Numerical cancellation failure would void the theorem; report it
        // rather than trusting the count.
        rep.verdict = Verdict::Indeterminate;
        rep.indeterminate_reason = "determinant kept an RHP pole after cancellation";
    } else if (rep.rhp_closed_loop_zeros == 0) {
        rep.verdict = Verdict::Stable;
    } else if (rep.rhp_closed_loop_zeros > 0) {
        rep.verdict = Verdict::Unstable;
    } else {
        rep.verdict = Verdict::Indeterminate;
        rep.indeterminate_reason = "anticlockwise encirclement with zero RHP poles";
    }
    if (locus.low_confidence) rep.caveats.push_back("sweep refinement budget exhausted");
    return rep;
}

/// Eigenvalue loci of I + R_ZY by the closed-form 2x2 eigenvalue formula with
/// branch-continuity tracking. The report is never allowed to contradict the
/// determinant criterion silently: counts are cross-checked and anticlockwise
/// encirclements always demote the verdict to Indeterminate.
struct EigenLociResult {
    Locus locus1;
    Locus locus2;
    StabilityReport report;
};

inline EigenLociResult eigen_loci(const RatMatrix& zg, const RatMatrix& yc, const FreqGrid& grid,
                                  double tol = kTolCancel) {
    if (zg.rows() != 2 || yc.rows() != 2)
        throw DimensionMismatch("eigenvalue loci need 2x2 matrices");
    const RatMatrix r = rm_mul(zg, yc, tol);
    const FactoredPoly d(1.0, r.common_den().roots, r.common_den().real_coeffs);
    const FactoredPoly n11 = r.numerator_over_common(0, 0, tol);
    const FactoredPoly n12 = r.numerator_over_common(0, 1, tol);
    const FactoredPoly n21 = r.numerator_over_common(1, 0, tol);
    const FactoredPoly n22 = r.numerator_over_common(1, 1, tol);

    auto eig_pair = [&](double w) -> std::pair<Complex, Complex> {
        const Complex s{0.0, w};
        const Complex dv = d.eval(s);
        const Complex a = n11.eval(s), b = n12.eval(s), c = n21.eval(s), e = n22.eval(s);
        const Complex disc = std::sqrt((a - e) * (a - e) + 4.0 * b * c);
        const Complex l1 = 1.0 + (a + e + disc) / (2.0 * dv);
        const Complex l2 = 1.0 + (a + e - disc) / (2.0 * dv);
        return {l1, l2};
    };

    EigenLociResult out;
    out.report.criterion = "eigenvalue";
    std::vector<double> omegas = grid.omega;
    Complex prev1, prev2;
    bool first = true;
    int swaps = 0;
    for (double w : omegas) {
        auto [l1, l2] = eig_pair(w);
        if (!first) {
            const double keep = std::abs(l1 - prev1) + std::abs(l2 - prev2);
            const double swap = std::abs(l2 - prev1) + std::abs(l1 - prev2);
            if (swap < keep) {
                std::swap(l1, l2);
                ++swaps;
            }
        }
        out.locus1.omega.push_back(w);
        out.locus1.values.push_back(l1);
        out.locus2.omega.push_back(w);
        out.locus2.values.push_back(l2);
        prev1 = l1;
        prev2 = l2;
        first = false;
    }
    out.locus1.closed = true;
    out.locus2.closed = true;
    for (const auto& v : out.locus1.values) out.locus1.min_abs = std::min(out.locus1.min_abs, std::abs(v));
    for (const auto& v : out.locus2.values) out.locus2.min_abs = std::min(out.locus2.min_abs, std::abs(v));

    // Branch closure check: if the two loci do not individually close, the
    // pair forms one connected curve and per-branch winding is undefined.
    const bool closes = std::abs(out.locus1.values.front() - out.locus1.values.back()) <
                            std::abs(out.locus1.values.front() - out.locus2.values.back()) ||
                        std::abs(out.locus1.values.front() - out.locus1.values.back()) < 1e-9;

    int w1 = 0, w2 = 0;
    bool unresolved = false;
    try {
        if (closes) {
            w1 = winding_number(out.locus1, {0.0, 0.0});
            w2 = winding_number(out.locus2, {0.0, 0.0});
        } else {
            // Concatenate into the single connected curve and count it whole.
            Locus joined = out.locus1;
            joined.omega.insert(joined.omega.end(), out.locus2.omega.begin(), out.locus2.omega.end());
            joined.values.insert(joined.values.end(), out.locus2.values.begin(),
                                 out.locus2.values.end());
            w1 = winding_number(joined, {0.0, 0.0});
            w2 = 0;
            out.report.caveats.push_back("branches exchange over the band; counted as one curve");
        }
    } catch (const Error& err) {
        unresolved = true;
        out.report.caveats.push_back(err.what());
    }

    const RatFun det = det_return_ratio(zg, yc, tol);
    const Locus det_locus = detail::symmetric_sweep(
        [&det](double w) { return rf_eval(det, Complex{0.0, w}); }, grid);
    int det_ccw = 0;
    bool det_ok = true;
    try {
        det_ccw = winding_number(det_locus, {0.0, 0.0});
    } catch (const Error&) {
        det_ok = false;
    }

    out.report.encirclements_ccw = w1 + w2;
    out.report.rhp_closed_loop_zeros = -(w1 + w2);
    const bool has_ccw_arc = (w1 > 0) || (w2 > 0);
    if (unresolved) {
        out.report.verdict = Verdict::Indeterminate;
        out.report.indeterminate_reason = "winding unresolved on an eigenvalue locus";
    } else if (has_ccw_arc) {
        // An anticlockwise encirclement cannot be explained with P = 0 and
        // there is no guarantee the square-root branches form proper transfer
        // functions, so the eigenvalue criterion alone proves nothing here.
        out.report.verdict = Verdict::Indeterminate;
        out.report.indeterminate_reason = "anticlockwise encirclement on an eigenvalue locus";
        out.report.caveats.push_back("eigenvalue loci are not guaranteed proper transfer functions");
    } else if (det_ok && (w1 + w2) != det_ccw) {
        out.report.verdict = Verdict::Indeterminate;
        out.report.indeterminate_reason = "eigenvalue-loci count disagrees with determinant";
    } else {
        out.report.verdict = ((w1 + w2) == 0) ? Verdict::Stable : Verdict::Unstable;
    }
    return out;
}

/// Argument-principle bookkeeping for a scalar rational channel: N (clockwise
/// encirclements of the origin by the Nyquist locus) must equal Z - P from
/// the factored-form census.
struct ArgumentPrincipleResult {
    int n_clockwise = 0;
    int z_rhp = 0;
    int p_rhp = 0;
    bool consistent = false;
};

inline ArgumentPrincipleResult argument_principle_check(const RatFun& rf, const FreqGrid& grid) {
    if (rf.num.degree() > rf.den.degree())
        throw ConfigError("argument principle check needs a proper or biproper channel");
    ArgumentPrincipleResult out;
    out.z_rhp = rhp_census(rf.num.roots).rhp;
    out.p_rhp = rhp_census(rf.den.roots).rhp;
    FreqGrid g = grid;
    if (!(g.base_step_hz > 0.0) && g.omega.size() > 1)
        g.base_step_hz = (g.omega[1] - g.omega[0]) / kTwoPi;
    for (int attempt = 0; attempt < 3; ++attempt) {
        const Locus locus = detail::symmetric_sweep(
            [&rf](double w) { return rf_eval(rf, Complex{0.0, w}); }, g);
        try {
            out.n_clockwise = -winding_number(locus, {0.0, 0.0}, rf.relative_degree());
        } catch (const UnresolvedWinding&) {
            if (attempt == 2) throw;
            g = FreqGrid::symmetric(g.omega.back() / kTwoPi, g.base_step_hz / 4.0);
            continue;
        }
        out.consistent = (out.n_clockwise == out.z_rhp - out.p_rhp);
        if (out.consistent || attempt == 2) break;
        g = FreqGrid::symmetric(2.0 * g.omega.back() / kTwoPi, g.base_step_hz / 2.0);
    }
    return out;
}

}  // namespace imstab

#endif  // IMSTAB_CRITERIA_HPP
