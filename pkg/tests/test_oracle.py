import numpy as np
import pytest

from reducedrank.numkernel import IllConditionedError, MomentSet
from reducedrank.oracle import (DegenerateWeightsError, ReducedMoments, fullrank_mmse,
                                joint_fixed_point, mmse_given_S, mse_given, projection_mmse,
                                reduced_w_mmse)

from conftest import crandn, random_hpd


def random_moments(rng, M, snr=1.0):
    """Moments of a jointly Gaussian (r, d) pair built from a mixing model.

    r = G z, d = a^H z + v with z, v white, so R, p and sigma_d^2 follow in
    closed form and synthetic samples can be drawn from the same model.
    """
    G = crandn(rng, M, M) + np.eye(M)
    a = crandn(rng, M) * snr
    v_var = 0.3
    R = G @ G.conj().T
    p = G @ a  # E[r d*]
    sigma = np.vdot(a, a).real + v_var
    return MomentSet(R=0.5 * (R + R.conj().T), p=p, sigma_d_sq=sigma), (G, a, v_var)


def sample_mse(f, model, n, rng):
    G, a, v_var = model
    M = G.shape[0]
    z = crandn(rng, n, M)
    r = z @ G.T
    d = z @ a.conj() + np.sqrt(v_var) * crandn(rng, n)
    x = r @ f.conj()
    return np.mean(np.abs(d - x) ** 2)


def moments(R, p, s=1.0):
    return MomentSet(R=np.asarray(R, complex), p=np.asarray(p, complex), sigma_d_sq=s)


def consistent(rng, M, excess=0.5):
    """Random PD moments with sigma_d^2 chosen so the Wiener MMSE equals ``excess``."""
    R, p = random_hpd(rng, M), crandn(rng, M)
    return moments(R, p, np.vdot(p, np.linalg.solve(R, p)).real + excess)


class TestFullRank:
    def test_uncorrelated(self):
        w, J = fullrank_mmse(moments(np.eye(3), np.zeros(3), 2.0))
        assert not np.any(w) and J == 2.0

    def test_predictable(self):
        w, J = fullrank_mmse(moments(np.eye(3), np.eye(3)[0]))
        np.testing.assert_allclose(w, np.eye(3)[0])
        assert J == pytest.approx(0, abs=1e-15)

    def test_singular(self):
        with pytest.raises(IllConditionedError):
            fullrank_mmse(moments(np.zeros((2, 2)), np.ones(2)))

    def test_monte_carlo(self, rng):
        m, model = random_moments(rng, 5)
        w, J = fullrank_mmse(m)
        assert sample_mse(w, model, 100_000, rng) == pytest.approx(J, rel=0.02)


class TestReducedWeights:
    def test_identity_projection(self, rng):
        R = random_hpd(rng, 4)
        m = moments(R, crandn(rng, 4))
        np.testing.assert_allclose(reduced_w_mmse(np.eye(4), m), fullrank_mmse(m)[0], atol=1e-12)

    def test_scalar_restriction(self):
        m = moments(np.eye(2), [0.3 - 1j, 2.0])
        np.testing.assert_allclose(reduced_w_mmse(np.eye(2, 1), m), [0.3 - 1j])

    def test_rank_deficient(self):
        S = np.ones((3, 2))
        with pytest.raises(IllConditionedError):
            reduced_w_mmse(S, moments(np.eye(3), np.ones(3)))

    def test_random_search(self, rng):
        m, _ = random_moments(rng, 6)
        S = crandn(rng, 6, 2)
        w = reduced_w_mmse(S, m)
        J = mse_given(S, w, m)
        cands = w + 0.5 * crandn(rng, 1000, 2)
        assert all(J <= mse_given(S, c, m) for c in cands)

    def test_reduced_moments_recorded(self, rng):
        R, p, S = random_hpd(rng, 5), crandn(rng, 5), crandn(rng, 5, 2)
        red = ReducedMoments.project(S, moments(R, p))
        np.testing.assert_allclose(red.R_bar, S.conj().T @ R @ S, atol=1e-12)
        np.testing.assert_allclose(red.p_bar, S.conj().T @ p, atol=1e-12)
        assert red.S is not None


class TestProjection:
    def test_rank_one_is_wiener(self, rng):
        m = moments(random_hpd(rng, 4), crandn(rng, 4))
        S = projection_mmse(m, [1.0])
        np.testing.assert_allclose(S[:, 0], fullrank_mmse(m)[0], atol=1e-12)

    def test_degenerate(self, rng):
        with pytest.raises(DegenerateWeightsError, match="degenerate weights"):
            projection_mmse(moments(np.eye(2), np.ones(2)), np.zeros(1))

    def test_stationarity(self, rng):
        m = moments(random_hpd(rng, 5), crandn(rng, 5))
        w = crandn(rng, 2)
        S = projection_mmse(m, w, S_prev=crandn(rng, 5, 2))
        w2 = reduced_w_mmse(S, m)
        f = S @ w2
        # R f is parallel to p: residual of projecting R f on p vanishes
        Rf = m.R @ f
        coef = np.vdot(m.p, Rf) / np.vdot(m.p, m.p)
        assert np.linalg.norm(Rf - coef * m.p) < 1e-10 * np.linalg.norm(Rf)

    def test_weight_scaling(self, rng):
        m = moments(random_hpd(rng, 5), crandn(rng, 5))
        w, S0 = crandn(rng, 2), crandn(rng, 5, 2)
        composite = []
        for scale in (1.0, 2.0):
            S = projection_mmse(m, scale * w, S_prev=S0)
            composite.append(S @ reduced_w_mmse(S, m))
        np.testing.assert_allclose(composite[0], composite[1], atol=1e-10)

    def test_descent(self, rng):
        m = moments(random_hpd(rng, 4), crandn(rng, 4))
        S = crandn(rng, 4, 2)
        w = reduced_w_mmse(S, m)
        before = mse_given(S, w, m)
        S = projection_mmse(m, w, S_prev=S)
        after = mse_given(S, reduced_w_mmse(S, m), m)
        assert after <= before + 1e-12


class TestMse:
    def test_zero_weights(self, rng):
        assert mse_given(crandn(rng, 3, 2), np.zeros(2), moments(np.eye(3), np.ones(3), 1.7)) == 1.7

    def test_embedded_optimum(self, rng):
        m = consistent(rng, 4)
        w, J = fullrank_mmse(m)
        assert mse_given(np.eye(4), w, m) == pytest.approx(J, abs=1e-12)

    def test_monte_carlo(self, rng):
        m, model = random_moments(rng, 4)
        S, w = crandn(rng, 4, 2), crandn(rng, 2) * 0.3
        J = mse_given(S, w, m)
        assert sample_mse(S @ w, model, 100_000, rng) == pytest.approx(J, rel=0.02)

    def test_mmse_identity(self, rng):
        m = consistent(rng, 4)
        assert mmse_given_S(np.eye(4), m) == pytest.approx(fullrank_mmse(m)[1], abs=1e-12)

    def test_mmse_white_spanning(self, rng):
        p = crandn(rng, 5)
        S = np.column_stack([p, crandn(rng, 5)])
        m = moments(np.eye(5), p, 4.0)
        assert mmse_given_S(S, m) == pytest.approx(4.0 - np.vdot(p, p).real, abs=1e-12)

    def test_eq10_matches_eq7(self, rng):
        for _ in range(50):
            m, _ = random_moments(rng, 6)
            S = crandn(rng, 6, 3)
            assert abs(mmse_given_S(S, m) - mse_given(S, reduced_w_mmse(S, m), m)) <= 1e-10 * max(1, m.sigma_d_sq)


def power_iteration_oracle(m, iters=500):
    """min over unit s of sigma^2 - |s^H p|^2 / s^H R s, by iterating s <- R^-1 p p^H s."""
    s = np.ones(m.dim, complex)
    Rinv_p = np.linalg.inv(m.R) @ m.p
    for _ in range(iters):
        s = Rinv_p * np.vdot(m.p, s)
        s /= np.linalg.norm(s)
    return m.sigma_d_sq - abs(np.vdot(s, m.p)) ** 2 / np.vdot(s, m.R @ s).real


class TestJointFixedPoint:
    def test_full_rank(self, rng):
        m = consistent(rng, 4)
        design = joint_fixed_point(m, 4, init_S=np.eye(4))
        assert design.converged
        assert design.mse_trajectory[0] == pytest.approx(fullrank_mmse(m)[1], abs=1e-12)
        assert len(design.mse_trajectory) == 2

    @pytest.mark.parametrize("D", [1, 2, 4])
    def test_white_input(self, rng, D):
        p = crandn(rng, 6)
        m = moments(np.eye(6), p, 10.0)
        design = joint_fixed_point(m, D)
        assert design.mse == pytest.approx(10.0 - np.vdot(p, p).real, abs=1e-10)

    def test_restarts_and_power_iteration(self, rng):
        m, _ = random_moments(rng, 4)
        design = joint_fixed_point(m, 1)
        restarts = [joint_fixed_point(m, 1, init_S=crandn(rng, 4, 1)).mse for _ in range(50)]
        assert design.mse <= min(restarts) + 1e-6
        assert abs(design.mse - power_iteration_oracle(m)) <= 1e-6

    def test_invalid_rank(self, rng):
        m = moments(np.eye(3), np.ones(3))
        with pytest.raises(ValueError):
            joint_fixed_point(m, 4)
        with pytest.raises(ValueError):
            joint_fixed_point(m, 0)

    def test_max_iters_is_not_error(self, rng):
        m, _ = random_moments(rng, 5)
        design = joint_fixed_point(m, 2, init_S=crandn(rng, 5, 2), max_iters=1)
        assert not design.converged and len(design.mse_trajectory) == 1

    def test_descent_and_sandwich(self, rng):
        for _ in range(100):
            M = int(rng.integers(2, 9))
            D = int(rng.integers(1, M + 1))
            m, _ = random_moments(rng, M)
            design = joint_fixed_point(m, D, init_S=crandn(rng, M, D))
            traj = np.array(design.mse_trajectory)
            assert np.all(np.diff(traj) <= 1e-10)
            assert fullrank_mmse(m)[1] - 1e-10 <= design.mse <= m.sigma_d_sq

    def test_rank_monotone(self, rng):
        M = 6
        m, _ = random_moments(rng, M)
        design = joint_fixed_point(m, 1, init_S=crandn(rng, M, 1))
        for D in range(2, M + 1):
            init = np.column_stack([design.S, np.eye(M)[:, D - 1]])
            nxt = joint_fixed_point(m, D, init_S=init)
            assert nxt.mse <= design.mse + 1e-8
            design = nxt

    def test_basis_change(self, rng):
        m, _ = random_moments(rng, 5)
        design = joint_fixed_point(m, 2, init_S=crandn(rng, 5, 2))
        A = crandn(rng, 2, 2) + 2 * np.eye(2)
        J = mse_given(design.S @ A, np.linalg.solve(A, design.w_bar), m)
        assert abs(J - design.mse) <= 1e-10
