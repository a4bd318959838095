#ifndef IMSTAB_LOGDERIV_HPP
#define IMSTAB_LOGDERIV_HPP

#include <cmath>
#include <string>
#include <vector>

#include "imstab/criteria.hpp"
#include "imstab/errors.hpp"
#include "imstab/frames.hpp"
#include "imstab/ratfun.hpp"

namespace imstab {

/// Ordered frequency-response samples of one scalar channel.
struct FreqResponse {
    std::vector<double> omega;  // rad/s, strictly increasing
    std::vector<Complex> values;
};

inline FreqResponse sample_response(const RatFun& rf, const std::vector<double>& omegas) {
    FreqResponse r;
    r.omega = omegas;
    r.values.reserve(omegas.size());
    for (double w : omegas) r.values.push_back(rf_eval(rf, Complex{0.0, w}));
    return r;
}

/// Logarithmic derivative d log(g)/dw of a sampled channel. Masked points
/// carry the reason they were excluded.
struct LogDerivTrace {
    std::vector<double> omega;
    std::vector<Complex> dl;
    std::vector<std::string> mask;  // empty string = valid sample
    double step = 0.0;              // rad/s

    bool masked(std::size_t i) const { return !mask[i].empty(); }
};

/// Central-difference logarithmic derivative, exact for a single first-order
/// factor. Endpoints use one-sided differences. The grid must be uniform with
/// the given step.
inline LogDerivTrace log_derivative(const FreqResponse& samples, double step) {
    const std::size_t n = samples.omega.size();
    if (n < 3) throw NonUniformGrid("need at least three samples");
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = samples.omega[i + 1] - samples.omega[i];
        if (std::abs(h - step) > 1e-9 * std::max(1.0, std::abs(step)))
            throw NonUniformGrid("sample spacing does not match the declared step");
    }
    LogDerivTrace trace;
    trace.step = step;
    trace.omega = samples.omega;
    trace.dl.assign(n, Complex{0.0, 0.0});
    trace.mask.assign(n, std::string{});

    std::vector<bool> value_ok(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(samples.values[i]) < 1e-280) {
            value_ok[i] = false;
            trace.mask[i] = "sample magnitude below underflow guard";
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!value_ok[i]) continue;
        if (i == 0) {
            if (value_ok[1])
                trace.dl[i] = (samples.values[1] - samples.values[0]) / (samples.values[0] * step);
            else
                trace.mask[i] = "neighbor below underflow guard";
        } else if (i == n - 1) {
            if (value_ok[n - 2])
                trace.dl[i] =
                    (samples.values[n - 1] - samples.values[n - 2]) / (samples.values[n - 1] * step);
            else
                trace.mask[i] = "neighbor below underflow guard";
        } else {
            if (value_ok[i - 1] && value_ok[i + 1])
                trace.dl[i] = (samples.values[i + 1] - samples.values[i - 1]) /
                              (samples.values[i] * 2.0 * step);
            else
                trace.mask[i] = "neighbor below underflow guard";
        }
    }
    return trace;
}

/// Masks a band of the trace, e.g. difference-method artifacts at the
/// carrier frequency.
inline void mask_band(LogDerivTrace& trace, double center, double half_width,
                      const std::string& reason) {
    for (std::size_t i = 0; i < trace.omega.size(); ++i) {
        if (std::abs(trace.omega[i] - center) <= half_width && trace.mask[i].empty())
            trace.mask[i] = reason;
    }
}

namespace detail {

/// Least-squares parabola through (x_i, y_i); returns coefficients of
/// y = c0 + c1 x + c2 x^2.
inline bool fit_parabola(const std::vector<double>& x, const std::vector<double>& y, double out[3]) {
    const std::size_t n = x.size();
    if (n < 3) return false;
    double s0 = double(n), s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i], xi2 = xi * xi;
        s1 += xi;
        s2 += xi2;
        s3 += xi2 * xi;
        s4 += xi2 * xi2;
        t0 += y[i];
        t1 += xi * y[i];
        t2 += xi2 * y[i];
    }
    Eigen::Matrix3d m;
    m << s0, s1, s2, s1, s2, s3, s2, s3, s4;
    Eigen::Vector3d rhs{t0, t1, t2};
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible()) return false;
    const Eigen::Vector3d c = lu.solve(rhs);
    out[0] = c(0);
    out[1] = c(1);
    out[2] = c(2);
    return true;
}

}  // namespace detail

/// Scans the trace for first-order-factor signatures: a negative minimum of
/// Im[D_L] together with a positive-slope zero crossing of Re[D_L] within two
/// grid steps marks an unstable mode (alpha_z = -1/Im at the extremum);
/// a positive maximum marks a stable mode the same way.
///
/// The extremum is sharpened by a parabola fit of -1/Im over the surrounding
/// window: for an isolated factor -1/Im is exactly quadratic in frequency, so
/// the vertex recovers alpha_z and omega_z without grid-offset bias.
inline std::vector<ModeEstimate> find_modes(const LogDerivTrace& trace) {
    std::vector<ModeEstimate> modes;
    const std::size_t n = trace.omega.size();
    if (n < 5) return modes;
    const double step = trace.step;
    for (std::size_t k = 2; k + 2 < n; ++k) {
        if (trace.masked(k) || trace.masked(k - 1) || trace.masked(k + 1)) continue;
        const double im = trace.dl[k].imag();
        const double im_l = trace.dl[k - 1].imag();
        const double im_r = trace.dl[k + 1].imag();
        const bool is_min = im < im_l && im <= im_r && im < 0.0;
        const bool is_max = im > im_l && im >= im_r && im > 0.0;
        if (!is_min && !is_max) continue;

        // Re zero-crossing with positive slope within +-2 grid steps.
        bool crossing = false;
        double re_slope = 0.0;
        double crossing_offset = 0.0;
        for (std::size_t j = (k >= 2 ? k - 2 : 0); j + 1 < std::min(n, k + 3); ++j) {
            if (trace.masked(j) || trace.masked(j + 1)) continue;
            const double a = trace.dl[j].real();
            const double b = trace.dl[j + 1].real();
            if (a <= 0.0 && b > 0.0) {
                crossing = true;
                re_slope = (b - a) / step;
                crossing_offset = trace.omega[j] + step * (-a / (b - a));
                break;
            }
        }
        if (!crossing || re_slope <= 0.0) continue;

        // Parabola through -1/Im on the window; vertex value is alpha_z.
        std::vector<double> xs, ys;
        for (std::size_t j = k - 2; j <= k + 2; ++j) {
            if (trace.masked(j)) continue;
            const double imj = trace.dl[j].imag();
            if (imj == 0.0) continue;
            xs.push_back(trace.omega[j] - trace.omega[k]);
            ys.push_back(-1.0 / imj);
        }
        double c[3];
        ModeEstimate mode;
        if (detail::fit_parabola(xs, ys, c) && c[2] != 0.0) {
            const double xv = -c[1] / (2.0 * c[2]);
            const double yv = c[0] - c[1] * c[1] / (4.0 * c[2]);
            if (std::abs(xv) <= 2.0 * step && yv != 0.0) {
                mode.alpha_z = yv;
                mode.omega_z = trace.omega[k] + xv;
            } else {
                mode.alpha_z = -1.0 / im;
                mode.omega_z = trace.omega[k];
            }
        } else {
            mode.alpha_z = -1.0 / im;
            mode.omega_z = trace.omega[k];
        }
        mode.im_extreme = -1.0 / mode.alpha_z;
        mode.re_slope = re_slope;
        mode.unstable = mode.alpha_z > 0.0;
        (void)crossing_offset;

        // Residual of the two-parameter model over the window.
        double resid = 0.0;
        int count = 0;
        for (std::size_t j = k - 2; j <= k + 2; ++j) {
            if (trace.masked(j)) continue;
            const double x = trace.omega[j] - mode.omega_z;
            const double denom = x * x + mode.alpha_z * mode.alpha_z;
            const double model_re = x / denom;
            const double model_im = -mode.alpha_z / denom;
            resid += std::norm(trace.dl[j] - Complex{model_re, model_im});
            ++count;
        }
        mode.quality = count > 0 ? std::sqrt(resid / count) : 0.0;
        if ((is_min && mode.alpha_z > 0.0) || (is_max && mode.alpha_z < 0.0)) modes.push_back(mode);
    }
    return modes;
}

/// Unconstrained least-squares refinement of a mode against the two-parameter
/// model of the separated real and imaginary parts over a +-20 step window.
/// Helps when a pole with a nearby real-part magnitude degrades the raw
/// extremum. Returns the seed unchanged if the iteration diverges.
inline ModeEstimate refine_mode(const LogDerivTrace& trace, const ModeEstimate& seed) {
    std::vector<double> xs;
    std::vector<Complex> ys;
    for (std::size_t i = 0; i < trace.omega.size(); ++i) {
        if (trace.masked(i)) continue;
        if (std::abs(trace.omega[i] - seed.omega_z) <= 20.0 * trace.step) {
            xs.push_back(trace.omega[i]);
            ys.push_back(trace.dl[i]);
        }
    }
    if (xs.size() < 5) return seed;

    double alpha = seed.alpha_z;
    double wz = seed.omega_z;
    double lambda = 1e-3;
    auto cost = [&](double a, double w) {
        double c = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double x = xs[i] - w;
            const double d = x * x + a * a;
            c += std::norm(ys[i] - Complex{x / d, -a / d});
        }
        return c;
    };
    double prev_cost = cost(alpha, wz);
    for (int it = 0; it < 60; ++it) {
        // residuals and analytic Jacobian of (Re, Im) w.r.t. (alpha, wz)
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double x = xs[i] - wz;
            const double d = x * x + alpha * alpha;
            const double d2 = d * d;
            const double r_re = xs[i] == wz && d == 0.0 ? 0.0 : x / d - ys[i].real();
            const double r_im = -alpha / d - ys[i].imag();
            const double dre_da = -2.0 * alpha * x / d2;
            const double dre_dw = (x * x - alpha * alpha) / d2;
            const double dim_da = (alpha * alpha - x * x) / d2;
            const double dim_dw = -2.0 * alpha * x / d2;
            jtj(0, 0) += dre_da * dre_da + dim_da * dim_da;
            jtj(0, 1) += dre_da * dre_dw + dim_da * dim_dw;
            jtj(1, 1) += dre_dw * dre_dw + dim_dw * dim_dw;
            jtr(0) += dre_da * r_re + dim_da * r_im;
            jtr(1) += dre_dw * r_re + dim_dw * r_im;
        }
        jtj(1, 0) = jtj(0, 1);
        Eigen::Matrix2d damped = jtj + lambda * Eigen::Matrix2d(jtj.diagonal().asDiagonal());
        Eigen::FullPivLU<Eigen::Matrix2d> lu(damped);
        if (!lu.isInvertible()) break;
        const Eigen::Vector2d delta = lu.solve(-jtr);
        const double na = alpha + delta(0);
        const double nw = wz + delta(1);
        const double nc = cost(na, nw);
        if (std::isfinite(nc) && nc < prev_cost) {
            alpha = na;
            wz = nw;
            prev_cost = nc;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (delta.norm() < 1e-12 * std::max(1.0, std::abs(wz))) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    if (!std::isfinite(alpha) || alpha == 0.0 || (alpha > 0.0) != (seed.alpha_z > 0.0))
        return seed;  // diverged or crossed the axis: keep the raw estimate

    ModeEstimate out = seed;
    out.alpha_z = alpha;
    out.omega_z = wz;
    out.im_extreme = -1.0 / alpha;
    out.unstable = alpha > 0.0;
    out.quality = std::sqrt(prev_cost / double(xs.size()));
    return out;
}

/// One analysed channel for the loop-level criterion.
struct LoopChannel {
    std::string name;
    DomainTag domain;
    FreqResponse response;
    bool physical = true;  // eigenvalue loci are analysable but non-physical
};

/// The loop-level logarithmic-derivative criterion: every channel is analysed
/// in its own domain and unstable modes must agree across domains (same
/// alpha within 5 percent after frame mapping) before the verdict turns
/// Unstable. No RHP pole inspection is involved anywhere.
inline StabilityReport stability_from_loops(const std::vector<LoopChannel>& channels,
                                            double step) {
    StabilityReport rep;
    rep.criterion = "logderiv";
    if (channels.empty()) {
        rep.verdict = Verdict::Indeterminate;
        rep.indeterminate_reason = "no channels supplied";
        return rep;
    }

    struct DomainSummary {
        DomainTag tag;
        bool any_physical = false;
        std::vector<ModeEstimate> unstable;
    };
    std::vector<DomainSummary> domains;

    for (const auto& ch : channels) {
        LogDerivTrace trace = log_derivative(ch.response, step);
        const double band = kTwoPi * 0.5;  // difference-method carrier artifacts
        if (ch.domain.kind == DomainTag::Kind::dq) {
            mask_band(trace, ch.domain.omega0, band, "carrier artifact");
            mask_band(trace, -ch.domain.omega0, band, "carrier artifact");
        } else {
            mask_band(trace, 0.0, band, "carrier artifact");
            mask_band(trace, 2.0 * ch.domain.omega0, band, "carrier artifact");
        }
        auto modes = find_modes(trace);
        for (auto& m : modes) {
            m = refine_mode(trace, m);
            m.channel = ch.name;
            m.domain = ch.domain.name();
            rep.modes.push_back(m);
        }
        rep.evidence.push_back(ch.name);
        if (!ch.physical) {
            rep.caveats.push_back("channel " + ch.name +
                                  " is non-physical; its modes do not enter the verdict");
            continue;
        }
        DomainSummary* dom = nullptr;
        for (auto& d : domains)
            if (d.tag.kind == ch.domain.kind) dom = &d;
        if (!dom) {
            domains.push_back({ch.domain, false, {}});
            dom = &domains.back();
        }
        dom->any_physical = true;
        for (const auto& m : modes)
            if (m.unstable) dom->unstable.push_back(m);
    }

    int physical_domains = 0;
    for (const auto& d : domains)
        if (d.any_physical) ++physical_domains;
    if (physical_domains == 0) {
        rep.verdict = Verdict::Indeterminate;
        rep.indeterminate_reason = "no physical channel supplied";
        return rep;
    }

    if (physical_domains == 1) {
        const auto& d = domains.front();
        rep.verdict = d.unstable.empty() ? Verdict::Stable : Verdict::Unstable;
        if (!d.unstable.empty()) rep.rhp_closed_loop_zeros = static_cast<int>(d.unstable.size());
        return rep;
    }

    // Cross-domain comparative study: an unstable verdict requires the same
    // alpha in every domain after mapping omega between frames.
    const DomainSummary* dq = nullptr;
    const DomainSummary* seq = nullptr;
    for (const auto& d : domains) {
        if (d.tag.kind == DomainTag::Kind::dq) dq = &d;
        if (d.tag.kind == DomainTag::Kind::sequence) seq = &d;
    }
    const bool dq_unstable = dq && !dq->unstable.empty();
    const bool seq_unstable = seq && !seq->unstable.empty();
    if (dq_unstable != seq_unstable) {
        rep.verdict = Verdict::Indeterminate;
        rep.indeterminate_reason = "inconsistent domain verdicts";
        return rep;
    }
    if (!dq_unstable) {
        rep.verdict = Verdict::Stable;
        return rep;
    }
    // Match each dq mode with a sequence mode: omega maps to w + w0 (or the
    // conjugate image mirrored about the carrier).
    int matched = 0;
    for (const auto& md : dq->unstable) {
        bool found = false;
        for (const auto& ms : seq->unstable) {
            const double alpha_tol = 0.05 * std::max(std::abs(md.alpha_z), std::abs(ms.alpha_z));
            if (std::abs(md.alpha_z - ms.alpha_z) > alpha_tol) continue;
            const double w0 = seq->tag.omega0;
            const double cand1 = md.omega_z + w0;
            const double cand2 = w0 - md.omega_z;
            const double wtol = 4.0 * step;
            if (std::abs(ms.omega_z - cand1) <= wtol || std::abs(ms.omega_z - cand2) <= wtol) {
                found = true;
                break;
            }
        }
        if (found) ++matched;
    }
    if (matched == 0) {
        rep.verdict = Verdict::Indeterminate;
        rep.indeterminate_reason = "unstable modes do not match across domains";
        return rep;
    }
    rep.verdict = Verdict::Unstable;
    rep.rhp_closed_loop_zeros = matched;
    return rep;
}

}  // namespace imstab

#endif  // IMSTAB_LOGDERIV_HPP
