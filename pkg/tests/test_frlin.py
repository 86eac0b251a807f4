"""Fractional polynomial / GL / Oustaloup unit tests.

Expected values come from independent oracles: binomial coefficients for GL
weights, direct complex arithmetic for frequency points, and a fine-step GL
re-implementation for trajectories.
"""

import cmath

import numpy as np
import pytest
from scipy.special import binom

from fohc.frlin import (
    FractionalPolynomial,
    FractionalTransferFunction,
    GlKernel,
    freq_response,
    gl_step,
    gl_weights,
    oustaloup_approx,
    oustaloup_differintegral,
)


def fpoly(*terms):
    return FractionalPolynomial(list(terms))


class TestFractionalPolynomial:
    def test_merges_duplicate_orders(self):
        p = fpoly((1.0, 0.71), (2.0, 0.71), (3.0, 0.0))
        assert p.terms == ((3.0, 0.71), (3.0, 0.0))

    def test_rejects_negative_order(self):
        with pytest.raises(ValueError):
            fpoly((1.0, -0.5))

    def test_integer_round_trip(self):
        p = FractionalPolynomial.from_integer_coeffs([2.0, 0.0, 1.0, 5.0])
        assert p.is_integer_order()
        np.testing.assert_array_equal(p.to_integer_coeffs(), [2.0, 0.0, 1.0, 5.0])

    def test_eval_half_power_at_one(self):
        # (j*1)^0.5 has unit magnitude and 45 degree phase
        p = fpoly((1.0, 0.5))
        v = p.evaluate(1.0)
        assert v == pytest.approx(0.70710678118654757 + 0.70710678118654757j, rel=1e-12)

    def test_eval_constant_term_at_zero(self):
        p = fpoly((1.0, 1.0), (0.1746, 0.0))
        assert p.evaluate(0.0) == pytest.approx(0.1746 + 0.0j)

    def test_eval_rejects_zero_for_fractional(self):
        with pytest.raises(ValueError):
            fpoly((1.0, 0.5)).evaluate(0.0)

    def test_eval_matches_direct_complex_arithmetic(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            terms = [(rng.normal(), float(rng.uniform(0, 3))) for _ in range(4)]
            p = fpoly(*terms)
            w = float(rng.uniform(0.01, 100.0))
            oracle = sum(c * (1j * w) ** a for c, a in terms)
            assert p.evaluate(w) == pytest.approx(oracle, rel=1e-12, abs=1e-12)

    def test_arithmetic(self):
        a = fpoly((2.0, 1.0), (1.0, 0.0))
        b = fpoly((1.0, 0.5))
        prod = a * b
        assert prod.terms == ((2.0, 1.5), (1.0, 0.5))
        s = a + b
        assert s.terms == ((2.0, 1.0), (1.0, 0.5), (1.0, 0.0))

    def test_phase_continuity_on_refined_grid(self):
        # refining a grid 10x never reveals >90 degree jumps between neighbors
        rng = np.random.default_rng(3)
        for _ in range(10):
            terms = [(abs(rng.normal()) + 0.1, float(rng.uniform(0, 2))) for _ in range(3)]
            p = fpoly(*terms)
            fine = np.logspace(-3, 3, 2000 * 10)
            phases = np.unwrap(np.angle(p.evaluate(fine)))
            assert np.max(np.abs(np.diff(phases))) < np.pi / 2


class TestFractionalTransferFunction:
    def test_rejects_zero_denominator(self):
        with pytest.raises(ValueError):
            FractionalTransferFunction(fpoly((1.0, 0.0)), FractionalPolynomial([]))

    def test_vehicle_dc_magnitude(self):
        # 4.39/(s + 0.1746) -> 4.39/0.1746 as omega -> 0+
        g1 = FractionalTransferFunction.from_terms([(4.39, 0.0)], [(1.0, 1.0), (0.1746, 0.0)])
        mag = abs(g1.evaluate(1e-9))
        assert mag == pytest.approx(4.39 / 0.1746, rel=1e-9)
        assert mag == pytest.approx(25.143184421534938, rel=1e-9)

    def test_servomotor_point(self):
        # 0.93/(0.61 s + 1) at 5.5 rad/s, against direct complex arithmetic
        p = FractionalTransferFunction.from_terms([(0.93, 0.0)], [(0.61, 1.0), (1.0, 0.0)])
        v = p.evaluate(5.5)
        oracle = 0.93 / (0.61 * 5.5j + 1.0)
        assert v == pytest.approx(oracle, rel=1e-14)
        assert abs(v) == pytest.approx(0.2656, abs=2e-4)
        assert np.degrees(cmath.phase(v)) == pytest.approx(-73.40, abs=0.01)

    def test_freq_response_validates_grid(self):
        tf = FractionalTransferFunction.from_terms([(1.0, 0.0)], [(1.0, 1.0), (1.0, 0.0)])
        with pytest.raises(ValueError):
            freq_response(tf, [0.0, 1.0])
        with pytest.raises(ValueError):
            freq_response(tf, [2.0, 1.0])

    def test_freq_response_reports_singular_point(self):
        # 1/(s^2 + 1) blows up at omega = 1 (undamped pole on the axis)
        tf = FractionalTransferFunction.from_terms([(1.0, 0.0)], [(1.0, 2.0), (1.0, 0.0)])
        with pytest.raises(ZeroDivisionError, match="1.0"):
            freq_response(tf, np.array([0.5, 1.0, 2.0]))

    def test_product_response_equals_response_product(self):
        rng = np.random.default_rng(11)
        grid = np.logspace(-2, 2, 50)
        for _ in range(10):
            t1 = FractionalTransferFunction.from_terms(
                [(rng.normal(), rng.uniform(0, 2))],
                [(abs(rng.normal()) + 0.2, rng.uniform(0.5, 2)), (1.0, 0.0)],
            )
            t2 = FractionalTransferFunction.from_terms(
                [(rng.normal(), rng.uniform(0, 1))],
                [(abs(rng.normal()) + 0.2, rng.uniform(0.5, 2)), (2.0, 0.0)],
            )
            lhs = freq_response(t1 * t2, grid)
            rhs = freq_response(t1, grid) * freq_response(t2, grid)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12)


class TestGlWeights:
    def test_binomial_oracle_half(self):
        w = gl_weights(0.5, 2)
        oracle = [(-1) ** k * binom(0.5, k) for k in range(3)]
        np.testing.assert_allclose(w, oracle, rtol=1e-14)
        np.testing.assert_allclose(w, [1.0, -0.5, -0.125], rtol=1e-14)

    def test_first_difference_for_order_one(self):
        np.testing.assert_array_equal(gl_weights(1.0, 3), [1.0, -1.0, 0.0, 0.0])

    def test_w1_is_minus_alpha(self):
        assert gl_weights(0.71, 1)[1] == pytest.approx(-0.71, rel=1e-15)

    def test_binomial_oracle_random_orders(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            a = float(rng.uniform(0.05, 2.0))
            w = gl_weights(a, 40)
            oracle = [(-1) ** k * binom(a, k) for k in range(41)]
            np.testing.assert_allclose(w, oracle, rtol=1e-10, atol=1e-15)

    def test_partial_sums_vanish(self):
        w = gl_weights(0.5, 10_000)
        assert abs(np.sum(w)) < 0.05

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            gl_weights(0.0, 5)
        with pytest.raises(ValueError):
            gl_weights(2.5, 5)
        with pytest.raises(ValueError):
            gl_weights(0.5, 0)


class TestGlStep:
    def test_euler_identity(self):
        k = GlKernel(1.0, 0.01, 10)
        assert gl_step(k, [2.0], 3.0) == pytest.approx(2.03, rel=1e-15)

    def test_first_step_is_h_alpha_rhs(self):
        k = GlKernel(0.5, 1.0, 10)
        assert gl_step(k, [0.0], 1.0) == pytest.approx(1.0)

    def test_relaxation_matches_fine_step_oracle(self):
        # D^0.5 x = -x under a unit step, h vs h/10, independent loop as oracle
        alpha, h, T = 0.5, 0.01, 2.0

        def run(step):
            n = int(round(T / step))
            w = np.concatenate(([1.0], np.cumprod(1 - (alpha + 1) / np.arange(1.0, n + 1))))
            x = np.zeros(n + 1)
            for k in range(1, n + 1):
                acc = np.dot(w[1 : k + 1], x[k - 1 :: -1][:k])
                x[k] = step**alpha * (1.0 - x[k - 1]) - acc
            return x

        coarse = run(h)
        fine = run(h / 10)[::10]
        err = np.linalg.norm(coarse - fine) / np.linalg.norm(fine)
        assert err < 0.01

        kern = GlKernel(alpha, h, int(T / h))
        x = [0.0]
        for k in range(1, int(T / h) + 1):
            x.insert(0, kern.step(x, 1.0 - x[0]))
        np.testing.assert_allclose(x[::-1], coarse, rtol=1e-12, atol=1e-14)

    def test_memory_truncation(self):
        k = GlKernel(0.5, 0.1, 100, memory_length=3)
        hist = np.linspace(1, 0.1, 10)
        full = GlKernel(0.5, 0.1, 100)
        assert k.step(hist, 0.0) != full.step(hist, 0.0)
        assert k.step(hist[:3], 0.0) == k.step(hist, 0.0)


class TestOustaloup:
    def test_half_order_point(self):
        tf = oustaloup_approx(0.5, 0.01, 100.0, 5)
        v = tf.evaluate(1.0)
        assert 0.89 <= abs(v) <= 1.12
        assert 40.0 <= np.degrees(cmath.phase(v)) <= 50.0

    def test_integer_passthrough(self):
        tf = oustaloup_approx(1.0, 0.01, 100.0, 5)
        assert tf.num.terms == ((1.0, 1.0),)
        assert tf.den.terms == ((1.0, 0.0),)

    def test_band_accuracy(self):
        # within 2 dB / 5 degrees over [2 w_low, w_high/2] for cells >= 4
        for alpha in (0.29, 0.5, 0.71):
            for cells in (4, 6):
                tf = oustaloup_approx(alpha, 0.01, 100.0, cells)
                w = np.logspace(np.log10(0.02), np.log10(50.0), 400)
                approx = tf.evaluate(w)
                exact = w**alpha * np.exp(1j * alpha * np.pi / 2)
                err_db = 20 * np.log10(np.abs(approx) / np.abs(exact))
                err_deg = np.degrees(np.angle(approx / exact))
                assert np.max(np.abs(err_db)) < 2.0
                assert np.max(np.abs(err_deg)) < 5.0

    def test_invalid_band(self):
        with pytest.raises(ValueError):
            oustaloup_approx(0.5, 10.0, 1.0, 4)
        with pytest.raises(ValueError):
            oustaloup_approx(0.5, 0.0, 1.0, 4)

    def test_differintegral_decomposition(self):
        # s^(-0.71) = s^0.29 / s
        tf = oustaloup_differintegral(-0.71, 1e-3, 1e3, 6)
        w = np.logspace(-1.5, 1.5, 100)
        exact = w**-0.71 * np.exp(-1j * 0.71 * np.pi / 2)
        got = tf.evaluate(w)
        np.testing.assert_allclose(np.abs(got), np.abs(exact), rtol=0.12)
        assert np.max(np.abs(np.degrees(np.angle(got / exact)))) < 5.0
