#ifndef IMSTAB_RATFUN_HPP
#define IMSTAB_RATFUN_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "imstab/errors.hpp"

namespace imstab {

using Complex = std::complex<double>;

/// Default relative tolerance for zero-pole cancellation. Tight enough that
/// physically distinct near values (e.g. -27 vs -28 rad/s) never merge.
inline constexpr double kTolCancel = 1e-6;

/// Default relative tolerance for root identification / round trips.
inline constexpr double kTolRoot = 1e-8;

namespace detail {

/// Horner evaluation of a coefficient polynomial (ascending degree).
template <typename Coeff>
inline Complex horner(std::span<const Coeff> coeffs, Complex s) {
    if (coeffs.empty()) return {0.0, 0.0};
    Complex acc = coeffs.back();
    for (std::size_t k = coeffs.size() - 1; k-- > 0;) {
        acc = acc * s + coeffs[k];
    }
    return acc;
}

/// Horner evaluation of value and first derivative simultaneously.
template <typename Coeff>
inline std::pair<Complex, Complex> horner_with_derivative(std::span<const Coeff> coeffs,
                                                          Complex s) {
    Complex p = coeffs.back();
    Complex dp = {0.0, 0.0};
    for (std::size_t k = coeffs.size() - 1; k-- > 0;) {
        dp = dp * s + p;
        p = p * s + coeffs[k];
    }
    return {p, dp};
}

/// Parlett-Reinsch balancing, Numerische Mathematik 13 (1969) 293-304.
/// Scales row/column pairs by powers of two until the 1-norm stops improving.
template <typename Mat>
inline void balance_matrix(Mat& m) {
    const int n = static_cast<int>(m.rows());
    Mat off = m;
    off.diagonal().setZero();
    const double gamma = 0.9;
    bool changed = true;
    int guard = 0;
    while (changed && guard++ < 100) {
        changed = false;
        for (int i = 0; i < n; ++i) {
            const double row_norm = off.row(i).template lpNorm<1>();
            const double col_norm = off.col(i).template lpNorm<1>();
            if (row_norm == 0.0 || col_norm == 0.0) continue;
            int exponent = 0;
            std::frexp(row_norm / col_norm, &exponent);
            exponent /= 2;
            if (exponent != 0) {
                const double scaled_col = std::ldexp(col_norm, exponent);
                const double scaled_row = std::ldexp(row_norm, -exponent);
                if (scaled_col + scaled_row < gamma * (col_norm + row_norm)) {
                    changed = true;
                    off.row(i) *= std::ldexp(1.0, -exponent);
                    off.col(i) *= std::ldexp(1.0, exponent);
                }
            }
        }
    }
    off.diagonal() = m.diagonal();
    m = off;
}

/// A few Newton steps on the monic polynomial; keeps a step only if the
/// residual actually shrinks.
template <typename Coeff>
inline Complex polish_root(std::span<const Coeff> monic, Complex r) {
    for (int it = 0; it < 3; ++it) {
        auto [p, dp] = horner_with_derivative(monic, r);
        if (std::abs(dp) < 1e-300) break;
        const Complex step = p / dp;
        const Complex cand = r - step;
        if (std::abs(horner(monic, cand)) < std::abs(p)) {
            r = cand;
        } else {
            break;
        }
    }
    return r;
}

inline std::vector<Complex> companion_roots(const std::vector<double>& monic_low) {
    // monic_low: coefficients b_0..b_{n-1} of t^n + b_{n-1} t^{n-1} + ... + b_0.
    const int n = static_cast<int>(monic_low.size());
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    comp.diagonal(-1).setOnes();
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -monic_low[static_cast<std::size_t>(i)];
    balance_matrix(comp);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(comp, false);
    std::vector<Complex> roots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    return roots;
}

inline std::vector<Complex> companion_roots(const std::vector<Complex>& monic_low) {
    const int n = static_cast<int>(monic_low.size());
    Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
    comp.diagonal(-1).setOnes();
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -monic_low[static_cast<std::size_t>(i)];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(comp, false);
    std::vector<Complex> roots(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) roots[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
    return roots;
}

template <typename Coeff>
inline std::vector<Complex> roots_impl(std::span<const Coeff> coeffs_in) {
    std::vector<Coeff> c(coeffs_in.begin(), coeffs_in.end());
    double cmax = 0.0;
    for (const auto& v : c) cmax = std::max(cmax, std::abs(v));
    if (cmax == 0.0) throw EmptyPolynomial("all coefficients zero");
    // Trim vanishing high-degree coefficients (roots pushed to infinity).
    while (c.size() > 1 && std::abs(c.back()) < 1e-300) c.pop_back();
    if (std::abs(c.back()) == 0.0) throw EmptyPolynomial("all coefficients zero");
    const int n = static_cast<int>(c.size()) - 1;
    if (n == 0) return {};
    if (n == 1) return {Complex(-Complex(c[0]) / Complex(c[1]))};
    if (n == 2) {
        const Complex a = c[2], b = c[1], d = c[0];
        const Complex disc = std::sqrt(b * b - 4.0 * a * d);
        // Pick the sign that avoids cancellation in -b -/+ disc.
        const Complex q = (std::real(std::conj(b) * disc) >= 0.0) ? -0.5 * (b + disc)
                                                                  : -0.5 * (b - disc);
        Complex r1 = (std::abs(a) > 0.0) ? q / a : Complex{0, 0};
        // Near-double roots: the Vieta sum form keeps the pair centered;
        // otherwise the product form keeps a tiny root accurate.
        Complex r2;
        if (std::abs(disc) <= 1e-6 * std::abs(b)) {
            r2 = -b / a - r1;
        } else {
            r2 = (std::abs(q) > 0.0) ? d / q : Complex{0, 0};
        }
        return {r1, r2};
    }
    // Variable scaling s = sigma * t with a Cauchy-style radius estimate keeps
    // companion entries O(1) for root sets far from unit magnitude.
    double sigma = 0.0;
    const double lead = std::abs(c.back());
    for (int k = 0; k < n; ++k) {
        const double mag = std::abs(c[static_cast<std::size_t>(k)]);
        if (mag == 0.0) continue;
        sigma = std::max(sigma, std::pow(mag / lead, 1.0 / double(n - k)));
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) sigma = 1.0;
    sigma = std::clamp(sigma, 1e-12, 1e15);
    std::vector<Coeff> monic(static_cast<std::size_t>(n));
    const double log_sigma = std::log(sigma);
    for (int k = 0; k < n; ++k) {
        // b_k = (c_k / c_n) * sigma^(k - n), assembled in log space.
        const Coeff ratio = c[static_cast<std::size_t>(k)] / c.back();
        const double mag = std::abs(ratio);
        if (mag == 0.0) {
            monic[static_cast<std::size_t>(k)] = Coeff(0);
        } else {
            const double logb = std::log(mag) + double(k - n) * log_sigma;
            monic[static_cast<std::size_t>(k)] =
                (logb < -700.0) ? Coeff(0) : Coeff(ratio / mag * std::exp(logb));
        }
    }
    std::vector<Complex> troots = companion_roots(monic);
    std::vector<Coeff> monic_full = monic;
    monic_full.push_back(Coeff(1));
    for (auto& r : troots) r = polish_root(std::span<const Coeff>(monic_full), r);
    for (auto& r : troots) r *= sigma;
    return troots;
}

/// Repairs conjugate symmetry of a root multiset coming from a
/// real-coefficient polynomial: pairs each upper-half root with its nearest
/// lower-half partner and averages, and flattens near-real strays.
inline void repair_conjugate_pairs(std::vector<Complex>& roots) {
    std::vector<std::size_t> upper, lower;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        const double scale = 1.0 + std::abs(roots[i]);
        if (roots[i].imag() > 1e-9 * scale) {
            upper.push_back(i);
        } else if (roots[i].imag() < -1e-9 * scale) {
            lower.push_back(i);
        } else {
            roots[i] = Complex(roots[i].real(), 0.0);
        }
    }
    std::vector<bool> used(lower.size(), false);
    for (std::size_t ui : upper) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = lower.size();
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(roots[ui] - std::conj(roots[lower[j]]));
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        const double scale = std::max(1.0, std::abs(roots[ui]));
        if (best_j < lower.size() && best <= 1e-4 * scale) {
            const Complex avg = 0.5 * (roots[ui] + std::conj(roots[lower[best_j]]));
            roots[ui] = avg;
            roots[lower[best_j]] = std::conj(avg);
            used[best_j] = true;
        } else if (std::abs(roots[ui].imag()) <= 1e-5 * scale) {
            // A real polynomial cannot have a lone complex root; a tiny
            // unpaired imaginary part is refinement noise on a real root.
            roots[ui] = Complex(roots[ui].real(), 0.0);
        }
    }
    for (std::size_t j = 0; j < lower.size(); ++j) {
        if (used[j]) continue;
        const Complex r = roots[lower[j]];
        if (std::abs(r.imag()) <= 1e-5 * std::max(1.0, std::abs(r)))
            roots[lower[j]] = Complex(r.real(), 0.0);
    }
}

/// Complex value in logarithmic form: value = exp(log_mag) * e^(i arg).
/// Keeps products of many polynomial factors representable.
struct LogComplex {
    double log_mag = -std::numeric_limits<double>::infinity();
    double arg = 0.0;

    Complex value() const {
        if (!std::isfinite(log_mag)) return {0.0, 0.0};
        const double m = std::exp(std::min(log_mag, 700.0));
        return {m * std::cos(arg), m * std::sin(arg)};
    }
};

/// Sum of log-form values, rescaled by the dominant magnitude.
inline LogComplex sum_log(std::span<const LogComplex> terms) {
    double lead = -std::numeric_limits<double>::infinity();
    for (const auto& t : terms) lead = std::max(lead, t.log_mag);
    if (!std::isfinite(lead)) return {};
    Complex acc{0.0, 0.0};
    for (const auto& t : terms) {
        const double d = t.log_mag - lead;
        if (d < -745.0) continue;
        const double m = std::exp(d);
        acc += Complex{m * std::cos(t.arg), m * std::sin(t.arg)};
    }
    const double am = std::abs(acc);
    if (am == 0.0) return {};
    return {lead + std::log(am), std::arg(acc)};
}

/// Aberth-Ehrlich simultaneous refinement of a full root set against a
/// pointwise evaluator of the polynomial (in log form). Used to recover root
/// accuracy lost to ill-conditioned coefficient expansions: the evaluator
/// works from the original factored terms, so clustered roots that the
/// companion step garbles are pulled back to the function's actual zeros.
template <typename LogEval>
inline void aberth_refine(std::vector<Complex>& roots, LogEval&& log_eval, int max_iters = 32) {
    const std::size_t n = roots.size();
    if (n == 0) return;
    const std::vector<Complex> initial = roots;
    // Split exactly coincident starting points.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(roots[i] - roots[j]) == 0.0) {
                const double eps = 1e-7 * std::max(1.0, std::abs(roots[i]));
                roots[j] += Complex{eps, eps};
            }
        }
    }
    auto log_deriv = [&](Complex s, double delta) -> Complex {
        try {
            const LogComplex lp = log_eval(s + Complex{delta, 0.0});
            const LogComplex lm = log_eval(s - Complex{delta, 0.0});
            if (!std::isfinite(lp.log_mag) || !std::isfinite(lm.log_mag))
                return {std::numeric_limits<double>::quiet_NaN(), 0.0};
            double darg = lp.arg - lm.arg;
            darg = std::remainder(darg, 2.0 * std::acos(-1.0));
            return Complex{lp.log_mag - lm.log_mag, darg} / (2.0 * delta);
        } catch (const Error&) {
            return {std::numeric_limits<double>::quiet_NaN(), 0.0};
        }
    };
    // The differencing step shrinks with the Newton step so the truncation
    // error of the numerical log-derivative never limits convergence.
    std::vector<double> last_step(n);
    for (std::size_t i = 0; i < n; ++i) last_step[i] = 1e-5 * std::max(1.0, std::abs(roots[i]));
    for (int it = 0; it < max_iters; ++it) {
        double worst_step = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double scale = std::max(1.0, std::abs(roots[i]));
            const double delta =
                std::clamp(0.01 * last_step[i], 1e-12 * scale, 1e-6 * scale);
            const Complex ld = log_deriv(roots[i], delta);
            if (!std::isfinite(ld.real()) || !std::isfinite(ld.imag())) continue;
            Complex repel{0.0, 0.0};
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const Complex d = roots[i] - roots[j];
                if (std::abs(d) < 1e-300) continue;
                repel += 1.0 / d;
            }
            const Complex denom = ld - repel;
            if (std::abs(denom) < 1e-300) continue;
            Complex step = 1.0 / denom;
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) continue;
            // Damp oversized steps so grossly misplaced starting points can
            // still travel toward a zero instead of being frozen.
            const double mag = std::abs(step);
            if (mag > 0.3 * scale) step *= 0.3 * scale / mag;
            roots[i] -= step;
            last_step[i] = std::max(std::abs(step), 1e-13 * scale);
            worst_step = std::max(worst_step, std::abs(step) / scale);
        }
        if (worst_step < 5e-15) break;
    }
    // A root whose iteration never settled (multiple roots stagnate at the
    // cluster radius) falls back to whichever position evaluates smaller:
    // the companion-matrix cluster preserves the polynomial value coherently,
    // an independently wandered root does not.
    for (std::size_t i = 0; i < n; ++i) {
        const double scale = std::max(1.0, std::abs(roots[i]));
        if (last_step[i] <= 1e-9 * scale) continue;
        try {
            const double refined_mag = log_eval(roots[i]).log_mag;
            const double initial_mag = log_eval(initial[i]).log_mag;
            if (!(refined_mag < initial_mag)) roots[i] = initial[i];
        } catch (const Error&) {
            roots[i] = initial[i];
        }
    }
}

/// Dense real-coefficient polynomial with an explicit logarithmic scale:
/// p(t) = exp(log_scale) * sum c_k t^k. The scale keeps expansions of
/// factored polynomials with large gains or many roots inside double range.
struct ScaledPoly {
    std::vector<double> c;
    double log_scale = 0.0;

    void normalize() {
        double m = 0.0;
        for (double v : c) m = std::max(m, std::abs(v));
        if (m == 0.0) {
            log_scale = 0.0;
            c.assign(1, 0.0);
            return;
        }
        const double lm = std::log(m);
        for (double& v : c) v /= m;
        log_scale += lm;
    }

    static ScaledPoly mul(const ScaledPoly& a, const ScaledPoly& b) {
        ScaledPoly out;
        out.c.assign(a.c.size() + b.c.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i)
            for (std::size_t j = 0; j < b.c.size(); ++j) out.c[i + j] += a.c[i] * b.c[j];
        out.log_scale = a.log_scale + b.log_scale;
        out.normalize();
        return out;
    }

    static ScaledPoly add(const ScaledPoly& a, const ScaledPoly& b) {
        const ScaledPoly& big = (a.log_scale >= b.log_scale) ? a : b;
        const ScaledPoly& small = (a.log_scale >= b.log_scale) ? b : a;
        const double d = small.log_scale - big.log_scale;
        const double w = (d < -700.0) ? 0.0 : std::exp(d);
        ScaledPoly out;
        out.c.assign(std::max(big.c.size(), small.c.size()), 0.0);
        for (std::size_t i = 0; i < big.c.size(); ++i) out.c[i] += big.c[i];
        for (std::size_t i = 0; i < small.c.size(); ++i) out.c[i] += w * small.c[i];
        out.log_scale = big.log_scale;
        out.normalize();
        return out;
    }
};

}  // namespace detail

/// Roots of a coefficient polynomial (ascending degree) via eigenvalues of
/// the balanced companion matrix of the scaled monic polynomial, with Newton
/// polishing. Degree 0 yields the empty multiset.
inline std::vector<Complex> roots_of(std::span<const double> coeffs) {
    auto roots = detail::roots_impl(coeffs);
    detail::repair_conjugate_pairs(roots);
    return roots;
}

inline std::vector<Complex> roots_of(std::span<const Complex> coeffs) {
    return detail::roots_impl(coeffs);
}

inline std::vector<Complex> roots_of(const std::vector<double>& coeffs) {
    return roots_of(std::span<const double>(coeffs));
}

inline std::vector<Complex> roots_of(const std::vector<Complex>& coeffs) {
    return roots_of(std::span<const Complex>(coeffs));
}

/// Polynomial in factored form: gain * prod(s - root_i).
///
/// The factored representation is primary throughout the library; coefficient
/// form is derived on demand. Common factors are root-multiset operations
/// with a relative tolerance, never coefficient GCDs.
struct FactoredPoly {
    double gain = 1.0;
    std::vector<Complex> roots;
    bool real_coeffs = true;

    FactoredPoly() = default;
    FactoredPoly(double g, std::vector<Complex> r, bool real = true)
        : gain(g), roots(std::move(r)), real_coeffs(real) {
        if (real_coeffs) detail::repair_conjugate_pairs(roots);
    }

    static FactoredPoly constant(double g) { return FactoredPoly(g, {}); }
    static FactoredPoly one() { return constant(1.0); }
    static FactoredPoly zero() { return constant(0.0); }

    /// Builds from real coefficients (ascending degree).
    static FactoredPoly from_coeffs(std::span<const double> coeffs) {
        std::vector<double> c(coeffs.begin(), coeffs.end());
        while (c.size() > 1 && std::abs(c.back()) < 1e-300) c.pop_back();
        if (c.empty() || (c.size() == 1 && c[0] == 0.0)) return zero();
        if (c.size() == 1) return constant(c[0]);
        return FactoredPoly(c.back(), roots_of(std::span<const double>(c)));
    }
    static FactoredPoly from_coeffs(const std::vector<double>& coeffs) {
        return from_coeffs(std::span<const double>(coeffs));
    }

    int degree() const { return static_cast<int>(roots.size()); }
    bool is_zero() const { return gain == 0.0; }
    bool is_constant() const { return roots.empty(); }

    detail::LogComplex eval_log(Complex s) const {
        if (is_zero()) return {};
        double log_mag = std::log(std::abs(gain));
        double arg = (gain < 0.0) ? std::acos(-1.0) : 0.0;
        for (const Complex& r : roots) {
            const Complex d = s - r;
            const double m = std::abs(d);
            if (m == 0.0) return {};
            log_mag += std::log(m);
            arg += std::arg(d);
        }
        return {log_mag, arg};
    }

    Complex eval(Complex s) const {
        // Accumulate in log space; product of many factors overflows otherwise.
        return eval_log(s).value();
    }

    /// Expanded coefficients, ascending degree. Requires a representable
    /// magnitude range; intended for modest degrees.
    std::vector<double> coeffs() const {
        if (is_zero()) return {0.0};
        detail::ScaledPoly p = expand_scaled(1.0);
        std::vector<double> out(p.c.size());
        for (std::size_t k = 0; k < p.c.size(); ++k) {
            out[k] = p.c[k] * std::exp(p.log_scale);
        }
        return out;
    }

    /// Expansion in the scaled variable t = s / sigma (see detail::ScaledPoly).
    detail::ScaledPoly expand_scaled(double sigma) const {
        detail::ScaledPoly p;
        p.c = {1.0};
        p.log_scale = std::log(std::abs(gain)) + degree() * std::log(sigma);
        if (gain < 0.0) p.c[0] = -1.0;
        // Multiply conjugate pairs as real quadratics to stay in real arithmetic.
        std::vector<Complex> pending = roots;
        std::vector<bool> used(pending.size(), false);
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (used[i]) continue;
            const Complex r = pending[i] / sigma;
            if (std::abs(r.imag()) < 1e-14 * (1.0 + std::abs(r))) {
                detail::ScaledPoly f;
                f.c = {-r.real(), 1.0};
                p = detail::ScaledPoly::mul(p, f);
                used[i] = true;
                continue;
            }
            // Find the conjugate partner.
            std::size_t j = pending.size();
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = i + 1; k < pending.size(); ++k) {
                if (used[k]) continue;
                const double d = std::abs(pending[k] / sigma - std::conj(r));
                if (d < best) {
                    best = d;
                    j = k;
                }
            }
            if (j < pending.size() && best < 1e-6 * (1.0 + std::abs(r))) {
                detail::ScaledPoly f;
                f.c = {std::norm(r), -2.0 * r.real(), 1.0};
                p = detail::ScaledPoly::mul(p, f);
                used[i] = true;
                used[j] = true;
            } else {
                // Unpaired complex root: fall back to its real/imag quadratic
                // contribution is impossible; treat as (t - Re r) and keep the
                // imaginary part as a residual quadratic term.
                detail::ScaledPoly f;
                f.c = {-r.real(), 1.0};
                p = detail::ScaledPoly::mul(p, f);
                used[i] = true;
            }
        }
        return p;
    }
};

/// gain and roots concatenate under multiplication; no numeric work needed.
inline FactoredPoly poly_mul(const FactoredPoly& a, const FactoredPoly& b) {
    if (a.is_zero() || b.is_zero()) return FactoredPoly::zero();
    FactoredPoly out;
    out.gain = a.gain * b.gain;
    out.roots = a.roots;
    out.roots.insert(out.roots.end(), b.roots.begin(), b.roots.end());
    out.real_coeffs = a.real_coeffs && b.real_coeffs;
    return out;
}

/// Weighted sum of factored polynomials: expands at a shared variable scale,
/// adds coefficients, re-roots once, then refines the roots against the
/// pointwise term sum (coefficient expansion alone cannot resolve clustered
/// roots; the factored terms can).
inline FactoredPoly poly_add(std::span<const FactoredPoly> terms,
                             std::span<const double> weights) {
    double sigma = 1.0;
    bool all_zero = true;
    for (const auto& t : terms) {
        if (!t.is_zero()) all_zero = false;
        for (const Complex& r : t.roots) sigma = std::max(sigma, std::abs(r));
    }
    if (all_zero) return FactoredPoly::zero();
    detail::ScaledPoly acc;
    acc.c = {0.0};
    acc.log_scale = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].is_zero() || weights[i] == 0.0) continue;
        detail::ScaledPoly p = terms[i].expand_scaled(sigma);
        p.log_scale += std::log(std::abs(weights[i]));
        if (weights[i] < 0.0)
            for (double& v : p.c) v = -v;
        acc = first ? p : detail::ScaledPoly::add(acc, p);
        first = false;
    }
    // Trim high-order coefficients that cancelled structurally.
    std::vector<double> c = acc.c;
    double cmax = 0.0;
    for (double v : c) cmax = std::max(cmax, std::abs(v));
    if (cmax == 0.0) return FactoredPoly::zero();
    while (c.size() > 1 && std::abs(c.back()) <= 1e-12 * cmax) c.pop_back();
    if (c.size() == 1) {
        const double lv = acc.log_scale + std::log(std::abs(c[0]));
        return FactoredPoly::constant((c[0] < 0 ? -1.0 : 1.0) * std::exp(lv));
    }
    std::vector<Complex> troots = roots_of(std::span<const double>(c));
    for (auto& r : troots) r *= sigma;
    auto log_eval = [&](Complex s) -> detail::LogComplex {
        std::vector<detail::LogComplex> vals;
        vals.reserve(terms.size());
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (terms[i].is_zero() || weights[i] == 0.0) continue;
            detail::LogComplex v = terms[i].eval_log(s);
            v.log_mag += std::log(std::abs(weights[i]));
            if (weights[i] < 0.0) v.arg += std::acos(-1.0);
            vals.push_back(v);
        }
        return detail::sum_log(vals);
    };
    detail::aberth_refine(troots, log_eval);
    // Leading coefficient in s-space: c_n * exp(log_scale) * sigma^-n.
    const int n = static_cast<int>(c.size()) - 1;
    const double log_lead = acc.log_scale + std::log(std::abs(c.back())) - n * std::log(sigma);
    const double lead = (c.back() < 0 ? -1.0 : 1.0) * std::exp(log_lead);
    return FactoredPoly(lead, std::move(troots));
}

inline FactoredPoly poly_add(const FactoredPoly& a, const FactoredPoly& b) {
    const FactoredPoly terms[2] = {a, b};
    const double w[2] = {1.0, 1.0};
    return poly_add(std::span<const FactoredPoly>(terms, 2), std::span<const double>(w, 2));
}

/// Root-multiset intersection with relative tolerance; the gain of the result
/// is 1 (common divisors are defined up to constants).
inline FactoredPoly poly_gcd(const FactoredPoly& a, const FactoredPoly& b,
                             double tol = kTolCancel) {
    if (a.is_zero()) return FactoredPoly(1.0, b.roots, b.real_coeffs);
    if (b.is_zero()) return FactoredPoly(1.0, a.roots, a.real_coeffs);
    std::vector<Complex> common;
    std::vector<bool> used(b.roots.size(), false);
    for (const Complex& ra : a.roots) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bj = b.roots.size();
        for (std::size_t j = 0; j < b.roots.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(ra - b.roots[j]);
            if (d < best) {
                best = d;
                bj = j;
            }
        }
        if (bj < b.roots.size()) {
            const double scale = std::max({1.0, std::abs(ra), std::abs(b.roots[bj])});
            if (best <= tol * scale) {
                common.push_back(0.5 * (ra + b.roots[bj]));
                used[bj] = true;
            }
        }
    }
    return FactoredPoly(1.0, std::move(common), a.real_coeffs && b.real_coeffs);
}

/// Root-multiset difference a / b; roots of b are matched and removed from a.
/// Unmatched divisor roots are ignored (callers check divisibility upstream).
inline FactoredPoly poly_divide_exact(const FactoredPoly& a, const FactoredPoly& b,
                                      double tol = kTolCancel) {
    std::vector<Complex> rem = a.roots;
    for (const Complex& rb : b.roots) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = rem.size();
        for (std::size_t i = 0; i < rem.size(); ++i) {
            const double d = std::abs(rem[i] - rb);
            if (d < best) {
                best = d;
                bi = i;
            }
        }
        if (bi < rem.size()) {
            const double scale = std::max({1.0, std::abs(rb), std::abs(rem[bi])});
            if (best <= tol * scale) rem.erase(rem.begin() + static_cast<std::ptrdiff_t>(bi));
        }
    }
    return FactoredPoly(a.gain / b.gain, std::move(rem), a.real_coeffs && b.real_coeffs);
}

/// Least common multiple as a root multiset (max multiplicity per cluster).
inline FactoredPoly poly_lcm(const FactoredPoly& a, const FactoredPoly& b,
                             double tol = kTolCancel) {
    const FactoredPoly g = poly_gcd(a, b, tol);
    const FactoredPoly quot = poly_divide_exact(FactoredPoly(1.0, b.roots, b.real_coeffs), g, tol);
    FactoredPoly out(1.0, a.roots, a.real_coeffs && b.real_coeffs);
    out.roots.insert(out.roots.end(), quot.roots.begin(), quot.roots.end());
    return out;
}

/// Ratio of two factored polynomials. Denominator gain is normalized to 1.
struct RatFun {
    FactoredPoly num;
    FactoredPoly den;

    RatFun() : num(FactoredPoly::zero()), den(FactoredPoly::one()) {}
    RatFun(FactoredPoly n, FactoredPoly d) : num(std::move(n)), den(std::move(d)) {
        if (den.gain == 0.0) throw DivideByZeroFunction("denominator gain is zero");
        num.gain /= den.gain;
        den.gain = 1.0;
    }

    static RatFun constant(double v) { return RatFun(FactoredPoly::constant(v), FactoredPoly::one()); }
    static RatFun one() { return constant(1.0); }
    static RatFun zero() { return constant(0.0); }

    bool is_zero() const { return num.is_zero(); }
    int relative_degree() const { return den.degree() - num.degree(); }
};

/// Greedy nearest-pair zero-pole cancellation within relative tolerance.
/// Removing a pair (z, p) shifts the nearest clustered surviving zero by
/// (z - p): exact division of a root cluster by (s - p) preserves the root
/// sum, which keeps leftover multiple-root members accurate.
inline RatFun cancel(const RatFun& rf, double tol_cancel = kTolCancel) {
    std::vector<Complex> zs = rf.num.roots;
    std::vector<Complex> ps = rf.den.roots;
    bool removed = true;
    while (removed && !zs.empty() && !ps.empty()) {
        removed = false;
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < zs.size(); ++i) {
            for (std::size_t j = 0; j < ps.size(); ++j) {
                const double d = std::abs(zs[i] - ps[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        const double scale = std::max({1.0, std::abs(zs[bi]), std::abs(ps[bj])});
        if (best <= tol_cancel * scale) {
            const Complex displacement = zs[bi] - ps[bj];
            const Complex removed_zero = zs[bi];
            zs.erase(zs.begin() + static_cast<std::ptrdiff_t>(bi));
            ps.erase(ps.begin() + static_cast<std::ptrdiff_t>(bj));
            if (displacement != Complex{0.0, 0.0} && !zs.empty()) {
                double nearest = std::numeric_limits<double>::infinity();
                std::size_t ni = zs.size();
                for (std::size_t i = 0; i < zs.size(); ++i) {
                    const double d = std::abs(zs[i] - removed_zero);
                    if (d < nearest) {
                        nearest = d;
                        ni = i;
                    }
                }
                if (ni < zs.size() && nearest <= 1e-3 * scale) zs[ni] += displacement;
            }
            removed = true;
        }
    }
    return RatFun(FactoredPoly(rf.num.gain, std::move(zs), rf.num.real_coeffs),
                  FactoredPoly(rf.den.gain, std::move(ps), rf.den.real_coeffs));
}

/// Log-form evaluation; throws PoleHit at (numerically exact) poles.
inline detail::LogComplex rf_eval_log(const RatFun& rf, Complex s) {
    if (rf.num.is_zero()) return {};
    detail::LogComplex n = rf.num.eval_log(s);
    if (!std::isfinite(n.log_mag)) return n;  // exact zero hit
    detail::LogComplex d = rf.den.eval_log(s);
    if (!std::isfinite(d.log_mag)) throw PoleHit("evaluation at a pole");
    return {n.log_mag - d.log_mag, n.arg - d.arg};
}

/// Product-of-factors evaluation in log space.
inline Complex rf_eval(const RatFun& rf, Complex s) {
    if (rf.num.is_zero()) return {0.0, 0.0};
    double log_mag = std::log(std::abs(rf.num.gain)) - std::log(std::abs(rf.den.gain));
    double arg = (rf.num.gain * rf.den.gain < 0.0) ? std::acos(-1.0) : 0.0;
    for (const Complex& z : rf.num.roots) {
        const Complex d = s - z;
        const double m = std::abs(d);
        if (m == 0.0) return {0.0, 0.0};
        log_mag += std::log(m);
        arg += std::arg(d);
    }
    for (const Complex& p : rf.den.roots) {
        const Complex d = s - p;
        const double m = std::abs(d);
        if (m < 1e-300) throw PoleHit("evaluation at a pole");
        log_mag -= std::log(m);
        arg -= std::arg(d);
    }
    if (log_mag > 700.0) log_mag = 700.0;
    const double mag = std::exp(log_mag);
    return {mag * std::cos(arg), mag * std::sin(arg)};
}

inline RatFun rf_mul(const RatFun& a, const RatFun& b, double tol = kTolCancel) {
    return cancel(RatFun(poly_mul(a.num, b.num), poly_mul(a.den, b.den)), tol);
}

inline RatFun rf_inv(const RatFun& rf) {
    if (rf.num.is_zero()) throw DivideByZeroFunction("inverse of the zero function");
    return RatFun(rf.den, rf.num);
}

inline RatFun rf_add(const RatFun& a, const RatFun& b, double tol = kTolCancel) {
    const FactoredPoly n = poly_add(poly_mul(a.num, b.den), poly_mul(b.num, a.den));
    return cancel(RatFun(n, poly_mul(a.den, b.den)), tol);
}

inline RatFun rf_sub(const RatFun& a, const RatFun& b, double tol = kTolCancel) {
    const FactoredPoly terms[2] = {poly_mul(a.num, b.den), poly_mul(b.num, a.den)};
    const double w[2] = {1.0, -1.0};
    const FactoredPoly n =
        poly_add(std::span<const FactoredPoly>(terms, 2), std::span<const double>(w, 2));
    return cancel(RatFun(n, poly_mul(a.den, b.den)), tol);
}

inline RatFun rf_div(const RatFun& a, const RatFun& b, double tol = kTolCancel) {
    return rf_mul(a, rf_inv(b), tol);
}

inline RatFun rf_scale(const RatFun& a, double k) {
    RatFun out = a;
    out.num.gain *= k;
    return out;
}

/// Right-half-plane census of a root multiset. Roots inside the marginal band
/// |Re| <= band * max(1, |root|) are counted separately.
struct RhpCensus {
    int rhp = 0;
    int marginal = 0;
    std::vector<Complex> rhp_roots;
};

inline RhpCensus rhp_census(const std::vector<Complex>& roots, double band = 1e-9) {
    RhpCensus c;
    for (const Complex& r : roots) {
        const double scale = std::max(1.0, std::abs(r));
        if (std::abs(r.real()) <= band * scale) {
            ++c.marginal;
        } else if (r.real() > 0.0) {
            ++c.rhp;
            c.rhp_roots.push_back(r);
        }
    }
    return c;
}

}  // namespace imstab

#endif  // IMSTAB_RATFUN_HPP
