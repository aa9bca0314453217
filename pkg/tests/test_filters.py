import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reducedrank.filters import (DivergenceError, FullRankState, JioState, KrylovLmsState,
                                 _krylov_basis, detect_bpsk, fullrank_lms_step, gradient_S,
                                 gradient_w, jio_lms_step, jio_output, krylov_lms_step,
                                 krylov_projection)
from reducedrank.numkernel import DegenerateBasisError

from conftest import crandn, random_hpd, span_projector


def random_state(rng, M, D, mu=0.1, eta=0.05):
    return JioState(S=crandn(rng, M, D), w_bar=crandn(rng, D), mu=mu, eta=eta)


def expanded_output(S, w, r):
    """x as the explicit double sum over rank index and chip index."""
    M, D = S.shape
    x = 0j
    for d in range(D):
        for m in range(M):
            x += np.conj(w[d]) * np.conj(S[m, d]) * r[m]
    return x


def fd_gradient(f, z, h=1e-6):
    """Real-parameterization gradient dJ/dRe + i dJ/dIm by central differences."""
    g = np.zeros(z.shape, complex)
    for idx in np.ndindex(z.shape):
        for unit in (1, 1j):
            zp, zm = z.copy(), z.copy()
            zp[idx] += unit * h
            zm[idx] -= unit * h
            g[idx] += unit * (f(zp) - f(zm)) / (2 * h)
    return g


class TestJioOutput:
    def test_identity_projection(self, rng):
        r = crandn(rng, 4)
        st_ = JioState(S=np.eye(4), w_bar=np.eye(4)[0], mu=0.1, eta=0.1)
        assert jio_output(st_, r) == pytest.approx(r[0], abs=1e-15)

    def test_zero_projection(self, rng):
        st_ = JioState(S=np.zeros((5, 2)), w_bar=crandn(rng, 2), mu=0.1, eta=0.1)
        assert jio_output(st_, crandn(rng, 5)) == 0

    def test_matches_expansion(self, rng):
        st_ = random_state(rng, 5, 2)
        r = crandn(rng, 5)
        assert abs(jio_output(st_, r) - expanded_output(st_.S, st_.w_bar, r)) < 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            jio_output(random_state(rng, 5, 2), np.ones(4))

    def test_basis_change_invariance(self, rng):
        st_ = random_state(rng, 6, 3)
        A = crandn(rng, 3, 3) + 2 * np.eye(3)
        other = JioState(S=st_.S @ A, w_bar=np.linalg.solve(A, st_.w_bar).conj().conj(), mu=0.1, eta=0.1)
        # x = w^H S^H r is invariant under S -> S A, w -> A^{-1} w only when A is applied as (A^{-1})^H ...
        # use the correct pair: (S A, A^{-H}... ) is not needed; w^H S^H = (S w)^H, so keep S w fixed
        other = JioState(S=st_.S @ A, w_bar=np.linalg.solve(A, st_.w_bar), mu=0.1, eta=0.1)
        r = crandn(rng, 6)
        assert abs(jio_output(st_, r) - jio_output(other, r)) < 1e-10


class TestGradients:
    def test_zero_error(self, rng):
        st_ = random_state(rng, 4, 2)
        r = crandn(rng, 4)
        d = jio_output(st_, r)
        assert np.abs(gradient_w(st_, r, d)).max() < 1e-15
        assert np.abs(gradient_S(st_, r, d)).max() < 1e-15

    def test_identity_example(self):
        st_ = JioState(S=np.eye(3, 2), w_bar=np.zeros(2), mu=0.1, eta=0.1)
        np.testing.assert_array_equal(gradient_w(st_, np.eye(3)[0], 1), [-1, 0])

    def test_zero_weights_zero_S_gradient(self, rng):
        st_ = JioState(S=crandn(rng, 4, 2), w_bar=np.zeros(2), mu=0.1, eta=0.1)
        assert not np.any(gradient_S(st_, crandn(rng, 4), 3 - 1j))

    @settings(max_examples=50, deadline=None)
    @given(M=st.integers(1, 8), D=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
    def test_finite_differences(self, M, D, seed):
        D = min(D, M)
        rng = np.random.default_rng(seed)
        st_ = random_state(rng, M, D)
        r, d = crandn(rng, M), complex(crandn(rng, 1)[0])

        def cost_w(w):
            return abs(d - np.vdot(w, st_.S.conj().T @ r)) ** 2

        def cost_S(S):
            return abs(d - np.vdot(st_.w_bar, S.conj().T @ r)) ** 2

        # real-parameterization gradient is twice the conjugate gradient
        gw = 2 * gradient_w(st_, r, d)
        gS = 2 * gradient_S(st_, r, d)
        fw = fd_gradient(cost_w, st_.w_bar.copy())
        fS = fd_gradient(cost_S, st_.S.copy())
        assert np.linalg.norm(fw - gw) <= 1e-6 * max(np.linalg.norm(gw), 1e-8)
        assert np.linalg.norm(fS - gS) <= 1e-6 * max(np.linalg.norm(gS), 1e-8)


class TestJioStep:
    def test_zero_projection_start(self):
        w = np.array([0.5 - 1j, 2.0])
        st_ = JioState(S=np.zeros((3, 2)), w_bar=w, mu=0.3, eta=0.2)
        out, new = jio_lms_step(st_, np.eye(3)[0], 1)
        assert out.x == 0 and out.e == 1
        np.testing.assert_array_equal(new.w_bar, w)
        np.testing.assert_allclose(new.S, 0.2 * np.outer(np.eye(3)[0], w.conj()))

    def test_hand_evaluated_step(self, rng):
        M, D, mu, eta = 4, 2, 0.1, 0.05
        st_ = random_state(rng, M, D, mu, eta)
        r, d = crandn(rng, M), 0.7 - 0.2j
        S, w = st_.S, st_.w_bar
        rb = [sum(np.conj(S[m, k]) * r[m] for m in range(M)) for k in range(D)]
        x = sum(np.conj(w[k]) * rb[k] for k in range(D))
        e = d - x
        w_ref = [w[k] + mu * np.conj(e) * rb[k] for k in range(D)]
        S_ref = [[S[m, k] + eta * np.conj(e) * r[m] * np.conj(w[k]) for k in range(D)] for m in range(M)]
        out, new = jio_lms_step(st_, r, d)
        assert abs(out.x - x) < 1e-13 and abs(out.e - e) < 1e-13
        np.testing.assert_allclose(new.w_bar, w_ref, rtol=0, atol=1e-13)
        np.testing.assert_allclose(new.S, S_ref, rtol=0, atol=1e-13)

    def test_step_equals_gradient_descent_exactly(self, rng):
        st_ = random_state(rng, 6, 3)
        r, d = crandn(rng, 6), 1.0
        _, new = jio_lms_step(st_, r, d)
        np.testing.assert_array_equal(new.w_bar, st_.w_bar - st_.mu * gradient_w(st_, r, d))
        np.testing.assert_array_equal(new.S, st_.S - st_.eta * gradient_S(st_, r, d))

    def test_reduces_to_fullrank(self, rng):
        M, mu = 5, 0.05
        jio = JioState.initial(M, M, mu=mu, eta=0.0)
        full = FullRankState.initial(M, mu)
        for _ in range(200):
            r, d = crandn(rng, M), rng.choice([-1.0, 1.0])
            oj, jio = jio_lms_step(jio, r, d)
            of, full = fullrank_lms_step(full, r, d)
            assert abs(oj.x - of.x) <= 1e-12
            assert np.abs(jio.w_bar - full.w).max() <= 1e-12

    def test_state_is_not_mutated(self, rng):
        st_ = random_state(rng, 4, 2)
        S0 = st_.S.copy()
        jio_lms_step(st_, crandn(rng, 4), 1)
        np.testing.assert_array_equal(st_.S, S0)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_names_step(self):
        st_ = JioState(S=np.full((2, 1), 1e200), w_bar=np.array([1e200]), mu=1.0, eta=1.0, step=7)
        with pytest.raises(DivergenceError, match="step 7"):
            jio_lms_step(st_, np.array([1e200, 1.0]), 1.0)

    def test_non_finite_input(self, rng):
        with pytest.raises(ValueError):
            jio_lms_step(random_state(rng, 3, 1), np.array([np.nan, 0, 0]), 1)

    def test_invalid_state(self):
        with pytest.raises(ValueError):
            JioState(S=np.eye(2, 3), w_bar=np.zeros(3), mu=0.1, eta=0.1)
        with pytest.raises(ValueError):
            JioState(S=np.eye(3, 2), w_bar=np.zeros(2), mu=0.0, eta=0.1)
        with pytest.raises(ValueError):
            JioState(S=np.eye(3, 2), w_bar=np.zeros(2), mu=0.1, eta=-1)

    def test_initial_state(self):
        st_ = JioState.initial(5, 2, 0.1, 0.2)
        np.testing.assert_array_equal(st_.S, np.eye(5, 2))
        assert not np.any(st_.w_bar)


class TestFullRank:
    def test_first_step(self):
        out, new = fullrank_lms_step(FullRankState.initial(3, 0.5), np.eye(3)[0], 1)
        assert out.x == 0 and out.e == 1
        np.testing.assert_array_equal(new.w, [0.5, 0, 0])

    def test_zero_error_keeps_weights(self, rng):
        st_ = FullRankState(w=crandn(rng, 4), mu=0.1)
        r = crandn(rng, 4)
        d = np.vdot(st_.w, r)
        _, new = fullrank_lms_step(st_, r, d)
        np.testing.assert_allclose(new.w, st_.w, atol=1e-15)

    def test_system_identification(self, rng):
        M, noise_var, mu = 8, 0.01, 0.01
        w_o = crandn(rng, M)
        st_ = FullRankState.initial(M, mu)
        errs = []
        for _ in range(5000):
            r = crandn(rng, M)
            d = np.vdot(w_o, r) + np.sqrt(noise_var) * crandn(rng, 1)[0]
            out, st_ = fullrank_lms_step(st_, r, d)
            errs.append(abs(out.e) ** 2)
        excess_db = 10 * np.log10(np.mean(errs[-1000:]) / noise_var)
        assert excess_db < 1.0


class TestKrylov:
    def test_rank_one(self, rng):
        p = crandn(rng, 5)
        S = krylov_projection(random_hpd(rng, 5), p, 1)
        np.testing.assert_allclose(S[:, 0], p / np.linalg.norm(p), atol=1e-14)

    def test_identity_degenerates(self, rng):
        p = crandn(rng, 4)
        S = krylov_projection(np.eye(4), p, 3)
        assert S.shape == (4, 1)

    def test_span(self, rng):
        R, p = random_hpd(rng, 6), crandn(rng, 6)
        S = krylov_projection(R, p, 2)
        explicit = np.column_stack([p, R @ p])
        assert np.abs(S @ S.conj().T - span_projector(explicit)).max() <= 1e-10

    def test_zero_p(self):
        with pytest.raises(DegenerateBasisError):
            krylov_projection(np.eye(3), np.zeros(3), 2)

    def test_batched_basis_matches(self, rng):
        R, p = random_hpd(rng, 6), crandn(rng, 6)
        A = _krylov_basis(R, p, 3)
        B = krylov_projection(R, p, 3)
        assert np.abs(A @ A.conj().T - B @ B.conj().T).max() < 1e-10

    def test_step_runs_and_adapts(self, rng):
        st_ = KrylovLmsState.initial(4, 2, mu=0.05)
        w_o = crandn(rng, 4)
        for _ in range(300):
            r = crandn(rng, 4)
            out, st_ = krylov_lms_step(st_, r, np.vdot(w_o, r))
        assert st_.step == 300
        assert np.all(np.isfinite(st_.w_bar))


class TestDetector:
    @pytest.mark.parametrize("x, b", [(0.5 + 0.2j, 1), (-0.1 + 5j, -1), (0, 1), (-0.0, 1)])
    def test_examples(self, x, b):
        assert detect_bpsk(x) == b

    def test_vectorized(self):
        np.testing.assert_array_equal(detect_bpsk(np.array([1, -1j, -2])), [1, 1, -1])

    @given(st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e100))
    def test_odd(self, x):
        if x.real != 0:
            assert detect_bpsk(-x) == -detect_bpsk(x)
