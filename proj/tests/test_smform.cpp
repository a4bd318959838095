#include <catch2/catch_amalgamated.hpp>

#include "imstab/smform.hpp"
#include "imstab/statespace.hpp"
#include "support/test_util.hpp"

using namespace imstab;
using testutil::multisets_match;

namespace {
RatFun over(std::vector<Complex> num_roots, std::vector<Complex> den_roots, double gain = 1.0) {
    return RatFun(FactoredPoly(gain, std::move(num_roots)), FactoredPoly(1.0, std::move(den_roots)));
}

RatMatrix invert_1x1(const RatMatrix& m) {
    return RatMatrix::from_entries(1, 1, {rf_inv(m.at(0, 0))});
}
}  // namespace

TEST_CASE("smith_mcmillan: identity matrix") {
    auto sm = smith_mcmillan(RatMatrix::identity(2));
    REQUIRE(sm.eps.size() == 2);
    CHECK(sm.eps[0].degree() == 0);
    CHECK(sm.eps[1].degree() == 0);
    CHECK(sm.delta[0].degree() == 0);
    CHECK(sm.delta[1].degree() == 0);
    CHECK(sm.k[0] == Catch::Approx(1.0));
}

TEST_CASE("smith_mcmillan: diag(1/(s+1), 1/((s+1)(s+2)))") {
    // Hand computation: D = (s+1)(s+2), N = diag(s+2, 1).
    // chi_1 = gcd(s+2, 1) = 1, chi_2 = det N = s+2.
    // eps = (1, s+2); diag(1/D, (s+2)/D) cancels to (1/((s+1)(s+2)), 1/(s+1)).
    auto m = RatMatrix::from_entries(
        2, 2,
        {over({}, {{-1, 0}}), RatFun::zero(), RatFun::zero(), over({}, {{-1, 0}, {-2, 0}})});
    auto sm = smith_mcmillan(m);
    CHECK(sm.eps[0].degree() == 0);
    CHECK(sm.eps[1].degree() == 0);
    // delta ordering satisfies delta_{i+1} | delta_i
    CHECK(multisets_match(sm.delta[0].roots, {{-1, 0}, {-2, 0}}, 1e-9));
    CHECK(multisets_match(sm.delta[1].roots, {{-1, 0}}, 1e-9));
    CHECK(sm.divisibility_chain_ok);
    auto [zeros, poles] = matrix_zeros_poles(sm);
    CHECK(zeros.empty());
    CHECK(multisets_match(poles, {{-1, 0}, {-1, 0}, {-2, 0}}, 1e-9));
}

TEST_CASE("smith_mcmillan: unimodular multiplication keeps zeros and poles") {
    auto ss = testutil::random_stable_ss(4, 2, 2);
    auto g = transfer_matrix(ss);
    // U(s) = [[1, s+3],[0, 1]] has constant determinant 1.
    auto u = RatMatrix::from_entries(
        2, 2, {RatFun::one(), over({{-3, 0}}, {}), RatFun::zero(), RatFun::one()});
    auto gu = rm_mul(g, u);
    auto sm_g = smith_mcmillan(g);
    auto sm_gu = smith_mcmillan(gu);
    auto [z1, p1] = matrix_zeros_poles(sm_g);
    auto [z2, p2] = matrix_zeros_poles(sm_gu);
    CHECK(multisets_match(z1, z2, 1e-6));
    CHECK(multisets_match(p1, p2, 1e-6));
}

TEST_CASE("smith_mcmillan: zero matrix rejected") {
    auto m = RatMatrix::from_entries(
        2, 2, {RatFun::zero(), RatFun::zero(), RatFun::zero(), RatFun::zero()});
    CHECK_THROWS_AS(smith_mcmillan(m), ZeroMatrix);
}

TEST_CASE("matrix_zeros_poles: direct invariant-factor read-off") {
    SmithMcMillan sm;
    sm.eps = {FactoredPoly::one(), FactoredPoly(1.0, {{1, 0}})};
    sm.delta = {FactoredPoly(1.0, {{-1, 0}}), FactoredPoly::one()};
    sm.k = {1.0, 1.0};
    auto [zeros, poles] = matrix_zeros_poles(sm);
    CHECK(multisets_match(zeros, {{1, 0}}, 1e-12));
    CHECK(multisets_match(poles, {{-1, 0}}, 1e-12));
}

TEST_CASE("matrix poles of a stable transfer matrix stay in the left half-plane") {
    auto ss = testutil::random_stable_ss(6, 2, 2);
    auto sm = smith_mcmillan(transfer_matrix(ss));
    auto [zeros, poles] = matrix_zeros_poles(sm);
    (void)zeros;
    for (const auto& p : poles) CHECK(p.real() < 0.0);
}

TEST_CASE("smith_mcmillan: poles of Zg*Yc lie in the union of subsystem modes") {
    auto zg_ss = testutil::random_stable_ss(4, 2, 2);
    auto yc_ss = testutil::random_stable_ss(3, 2, 2);
    auto prod = rm_mul(transfer_matrix(zg_ss), transfer_matrix(yc_ss));
    auto sm = smith_mcmillan(prod);
    auto [zeros, poles] = matrix_zeros_poles(sm);
    (void)zeros;
    auto union_modes = eigenvalues(zg_ss.A);
    auto yc_modes = eigenvalues(yc_ss.A);
    union_modes.insert(union_modes.end(), yc_modes.begin(), yc_modes.end());
    for (const auto& p : poles) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& u : union_modes) best = std::min(best, std::abs(p - u));
        CHECK(best <= 1e-5 * std::max(1.0, std::abs(p)));
    }
}

TEST_CASE("det_return_ratio: trivial cases") {
    SECTION("Zg = 0 gives the constant 1") {
        auto zg = RatMatrix::from_entries(
            2, 2, {RatFun::zero(), RatFun::zero(), RatFun::zero(), RatFun::zero()});
        auto yc = transfer_matrix(testutil::random_stable_ss(3, 2, 2));
        auto det = det_return_ratio(zg, yc);
        CHECK(det.num.degree() == 0);
        CHECK(det.den.degree() == 0);
        CHECK(det.num.gain == Catch::Approx(1.0));
    }
    SECTION("diagonal pair multiplies out") {
        auto zg = RatMatrix::from_entries(2, 2,
                                          {over({}, {{-1, 0}}), RatFun::zero(), RatFun::zero(),
                                           over({}, {{-2, 0}})});
        auto yc = RatMatrix::from_entries(2, 2,
                                          {over({}, {{-3, 0}}), RatFun::zero(), RatFun::zero(),
                                           over({}, {{-4, 0}})});
        auto det = det_return_ratio(zg, yc);
        // (1 + 1/((s+1)(s+3)))(1 + 1/((s+2)(s+4))) at probe points
        for (double w : {0.3, 1.7, 9.1}) {
            const Complex s{0.0, w};
            const Complex expected =
                (1.0 + rf_eval(over({}, {{-1, 0}}), s) * rf_eval(over({}, {{-3, 0}}), s)) *
                (1.0 + rf_eval(over({}, {{-2, 0}}), s) * rf_eval(over({}, {{-4, 0}}), s));
            CHECK(std::abs(rf_eval(det, s) - expected) <= 1e-9 * std::abs(expected));
        }
    }
}

TEST_CASE("oracle identity: zeros of det(I + R_ZY) are the closed-loop modes") {
    // The central theorem check on random stable pairs.
    for (int trial = 0; trial < 10; ++trial) {
        const int ng = 2 + trial % 5;
        const int nc = 2 + (trial * 3) % 6;
        auto zg_ss = testutil::random_stable_ss(ng, 2, 2);
        auto yc_ss = testutil::random_stable_ss(nc, 2, 2);
        auto det = det_return_ratio(transfer_matrix(zg_ss), transfer_matrix(yc_ss));
        auto oracle = eigenvalues(close_loop(zg_ss, yc_ss).A);
        double worst = 0.0;
        const bool ok = multisets_match(det.num.roots, oracle, 1e-6, &worst);
        INFO("trial " << trial << " worst mismatch " << worst);
        CHECK(ok);
        CHECK(rhp_census(det.den.roots).rhp == 0);
    }
}

TEST_CASE("det(I + R_ZY) three-route agreement") {
    auto zg_ss = testutil::random_stable_ss(4, 2, 2);
    auto yc_ss = testutil::random_stable_ss(4, 2, 2);
    auto zg = transfer_matrix(zg_ss);
    auto yc = transfer_matrix(yc_ss);
    const RatFun direct = det_return_ratio(zg, yc);
    // Route 2: Smith-McMillan of (I + R_ZY) itself.
    auto iplus = rm_identity_plus(rm_mul(zg, yc));
    const RatFun via_sm = det_from_smith_mcmillan(smith_mcmillan(iplus));
    for (double w : {0.23, 1.31, 4.7, 18.0}) {
        const Complex s{0.0, w};
        const Complex v1 = rf_eval(direct, s);
        const Complex v2 = rf_eval(via_sm, s);
        const Complex v3 = iplus.eval(s).determinant();  // pointwise numeric route
        CHECK(std::abs(v1 - v2) <= 1e-6 * std::max(1.0, std::abs(v1)));
        CHECK(std::abs(v1 - v3) <= 1e-6 * std::max(1.0, std::abs(v1)));
    }
}

TEST_CASE("det_return_differences: scalar reduction shares zeros") {
    // z_g + z_c versus 1 + z_g/z_c for scalars: same zeros.
    auto zg = RatMatrix::from_entries(1, 1, {over({{-0.5, 0}}, {{-2, 0}})});
    auto zc = RatMatrix::from_entries(1, 1, {over({{-3, 0}}, {{-1, 0}})});
    auto sum = rm_det(rm_add(zg, zc));
    auto ratio = det_return_ratio(zg, invert_1x1(zc));
    auto zeros_sum = sum.num.roots;
    auto zeros_ratio = ratio.num.roots;
    CHECK(multisets_match(zeros_sum, zeros_ratio, 1e-7));
}

TEST_CASE("det_return_differences: all four determinants share the zero multiset") {
    for (int trial = 0; trial < 5; ++trial) {
        auto zg_ss = testutil::random_stable_ss(3, 2, 2);
        auto yc_ss = testutil::random_stable_ss(3, 2, 2);
        auto zg = transfer_matrix(zg_ss);
        auto yc = transfer_matrix(yc_ss);
        auto zc = invert_2x2(yc);
        auto yg = invert_2x2(zg);
        const RatFun det_r = det_return_ratio(zg, yc);
        const auto rest = det_return_differences(zg, zc, yg, yc);
        double w1 = 0, w2 = 0, w3 = 0;
        CHECK(multisets_match(rest.det_sz.num.roots, det_r.num.roots, 1e-5, &w1));
        CHECK(multisets_match(rest.det_sy.num.roots, det_r.num.roots, 1e-5, &w2));
        CHECK(multisets_match(rest.det_r_alt.num.roots, det_r.num.roots, 1e-5, &w3));
        INFO("mismatches " << w1 << " " << w2 << " " << w3);
    }
}

TEST_CASE("det(S_Z) carries an RHP pole that det(I + R_ZY) lacks") {
    // Y_c stable but with an RHP transmission zero: det(N_c) has root +1, so
    // Z_c = Y_c^-1 has an RHP pole which S_Z = Z_g + Z_c inherits.
    auto yc = RatMatrix::from_entries(
        2, 2, {over({{1, 0}}, {{-2, 0}}), RatFun::zero(), RatFun::zero(), over({}, {{-3, 0}})});
    auto zg = RatMatrix::from_entries(
        2, 2, {over({}, {{-1, 0}}), RatFun::zero(), RatFun::zero(), over({}, {{-4, 0}})});
    auto zc = invert_2x2(yc);
    auto yg = invert_2x2(zg);
    const RatFun det_r = det_return_ratio(zg, yc);
    const auto rest = det_return_differences(zg, zc, yg, yc);
    CHECK(rhp_census(det_r.den.roots).rhp == 0);
    CHECK(rhp_census(rest.det_sz.den.roots).rhp > 0);
    // zeros still agree
    CHECK(multisets_match(rest.det_sz.num.roots, det_r.num.roots, 1e-6));
}
