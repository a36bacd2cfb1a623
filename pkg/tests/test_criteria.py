import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixorder.criteria import (
    CriterionSpec,
    check_b1_b2,
    criterion_value,
    dim_k,
    ln_compose,
    ln_trunc,
    penalty,
    scaled_gap,
    scaled_gap_closed_form,
    thresholds,
)

GRID = [10**e for e in range(2, 9)]
NU3 = CriterionSpec.nu_bic(3)
EPS = CriterionSpec.eps_bic(0.02)


class TestLn:
    def test_ln_trunc(self):
        assert ln_trunc(1) == 1.0
        assert ln_trunc(0) == 1.0
        assert ln_trunc(math.e**2) == pytest.approx(2.0, abs=1e-15)
        assert ln_trunc(1e6) == pytest.approx(13.8155106, abs=1e-7)

    def test_ln_trunc_negative(self):
        with pytest.raises(ValueError):
            ln_trunc(-1.0)

    def test_compose(self):
        assert ln_compose(3, 1e6) == 1.0
        assert ln_compose(3, 1e9) == pytest.approx(1.1090, abs=1e-4)
        for n in (0.5, 3.0, 1e4, 1e30):
            assert ln_compose(1, n) == ln_trunc(n)

    @given(st.integers(1, 6), st.floats(0, 1e300))
    def test_compose_at_least_one(self, nu, n):
        assert ln_compose(nu, n) >= 1.0


class TestPenalty:
    def test_bic(self):
        assert penalty(CriterionSpec.bic(), 2, 2, 100) == pytest.approx(0.13815511, abs=1e-8)

    def test_nu_bic_equals_bic(self):
        assert penalty(NU3, 2, 2, 100) == penalty(CriterionSpec.bic(), 2, 2, 100)

    def test_eps_bic(self):
        mpmath.mp.dps = 30
        ref = 3 * mpmath.log(100) ** mpmath.mpf("1.02") / 100
        assert penalty(EPS, 2, 2, 100) == pytest.approx(float(ref), rel=1e-14)
        assert penalty(EPS, 2, 2, 100) == pytest.approx(0.1424, abs=1e-4)

    def test_aic(self):
        assert penalty(CriterionSpec.aic(), 2, 2, 100) == pytest.approx(0.06, abs=1e-15)

    @pytest.mark.parametrize("n", [10, 10**3, 10**6])
    def test_bit_equality(self, n):
        for k in range(1, 8):
            for m in range(1, 10):
                assert penalty(NU3, k, m, n) == penalty(CriterionSpec.bic(), k, m, n)

    def test_nu_above_threshold_exceeds_bic(self):
        n = 10**9
        assert penalty(NU3, 2, 2, n) > penalty(CriterionSpec.bic(), 2, 2, n)

    def test_vanishes(self):
        # k = m = 10 gives alpha = 55, so the 1e-9 level is reached a little after n = 1e12
        for spec in (CriterionSpec.aic(), CriterionSpec.bic(), NU3, EPS):
            for k in range(1, 11):
                for m in range(1, 11):
                    assert penalty(spec, k, m, 10**12) < 2e-9
                    assert penalty(spec, k, m, 10**13) < 1e-9

    @settings(max_examples=100)
    @given(st.integers(1, 20), st.integers(1, 20), st.integers(2, 10**12),
           st.sampled_from(["aic", "bic", "nu-bic:2", "nu-bic:3", "eps-bic:0.5"]))
    def test_increasing_in_k(self, k, m, n, label):
        spec = CriterionSpec.parse(label)
        assert penalty(spec, k + 1, m, n) > penalty(spec, k, m, n)

    def test_free_convention(self):
        assert dim_k(3, 2, "free") == 8
        spec = CriterionSpec.bic(dim_convention="free")
        assert penalty(spec, 3, 2, 100) == pytest.approx(4 * math.log(100) / 100)

    def test_custom_alpha(self):
        spec = CriterionSpec.nu_bic(3, alpha=lambda k, m: k * k)
        assert penalty(spec, 3, 2, 100) == pytest.approx(9 * math.log(100) / 100)

    def test_non_increasing_alpha_rejected(self):
        with pytest.raises(ValueError):
            CriterionSpec.nu_bic(2, alpha=lambda k, m: 1.0)

    def test_criterion_value(self):
        assert criterion_value(CriterionSpec.aic(), 1.5, 2, 2, 100) == pytest.approx(1.56)
        with pytest.raises(ValueError):
            criterion_value(CriterionSpec.aic(), math.nan, 2, 2, 100)


class TestSpecParsing:
    @pytest.mark.parametrize("text", ["aic", "bic", "nu-bic:3", "eps-bic:0.02"])
    def test_round_trip(self, text):
        assert CriterionSpec.parse(text).label == text

    @pytest.mark.parametrize("text", ["nu-bic", "eps-bic", "nu-bic:0", "eps-bic:-1", "hqc", "aic:2"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            CriterionSpec.parse(text)


class TestConditions:
    def test_nu_bic_passes(self):
        rep = check_b1_b2(NU3, 5, 2, GRID)
        assert rep.ok, rep.violations

    def test_eps_bic_passes(self):
        assert check_b1_b2(EPS, 5, 2, GRID).ok

    def test_bic_fails_b2(self):
        rep = check_b1_b2(CriterionSpec.bic(), 5, 2, GRID)
        assert rep.b1_ok and not rep.b2_ok

    def test_aic_fails_b2(self):
        assert not check_b1_b2(CriterionSpec.aic(), 5, 2, GRID).b2_ok

    def test_constant_penalty_double(self):
        rep = check_b1_b2("constant", 5, 2, GRID, penalty_fn=lambda k, m, n: 0.1)
        assert not rep.b1_ok and not rep.b2_ok
        assert rep.violations

    @pytest.mark.parametrize("spec", [NU3, CriterionSpec.nu_bic(1), EPS, CriterionSpec.eps_bic(0.5)],
                             ids=lambda s: s.label)
    def test_closed_forms(self, spec):
        for k in range(1, 6):
            for l in range(k + 1, 6):
                for n in GRID:
                    got = scaled_gap(spec, k, l, 2, n)
                    want = scaled_gap_closed_form(spec, k, l, 2, n)
                    assert abs(got - want) <= 1e-12 * abs(want)


class TestThresholds:
    def test_nu3(self):
        out = thresholds(nu=3)["thresholds"]
        assert f"{out[0]['threshold']:.1e}" == "3.8e+06"
        assert f"{out[1]['threshold']:.1e}" == "5.7e+08"
        assert out[0]["magnitude"] == "3.8e+6"
        assert ln_compose(3, out[0]["threshold"] * (1 - 1e-12)) == 1.0

    def test_eps(self):
        out = thresholds(eps=0.02)["thresholds"]
        assert len(out) == 1
        assert out[0]["log_threshold"] == pytest.approx(117.3909, abs=1e-4)
        assert out[0]["magnitude"] == "9.6e+50"

    def test_symbolic_overflow(self):
        out = thresholds(nu=4)["thresholds"]
        assert out[0]["threshold"] is None
        assert out[0]["magnitude"].endswith("e+1656520")

    def test_tiny_eps_overflow(self):
        out = thresholds(eps=1e-4)["thresholds"]
        assert out[0]["threshold"] is None

    def test_exactly_one(self):
        with pytest.raises(ValueError):
            thresholds()
        with pytest.raises(ValueError):
            thresholds(nu=3, eps=0.1)
