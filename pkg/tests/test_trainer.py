"""Trainer unit tests: update correctness, gradient checks, invariants."""

import numpy as np
import pytest

from dltf import core, encoder, guarantees, trainer
from dltf.core import DataMatrix, Dictionary, SparseCodeBatch
from dltf.errors import InvalidK, LineSearchFailed


def _random_state(rng, n, m, N, k, hp=None):
    W = core.normalize_columns(rng.standard_normal((n, m)))
    Z = encoder.max_k_columns(rng.standard_normal((m, N)), k)
    Q = rng.standard_normal((m, N))
    Y = rng.standard_normal((m, N))
    return trainer.TrainerState(W=W, Z=SparseCodeBatch(Z, k), Q=Q, Y=Y)


def _data(rng, n, N):
    return DataMatrix(rng.standard_normal((n, N)))


def test_hyperparams_validation():
    with pytest.raises(InvalidK):
        trainer.Hyperparams(m=4, k=5)
    with pytest.raises(ValueError):
        trainer.Hyperparams(m=4, k=2, beta=0.0)
    with pytest.raises(ValueError):
        trainer.Hyperparams(m=4, k=2, lam=-1.0)
    with pytest.raises(ValueError):
        trainer.Hyperparams(m=4, k=2, outer_iters=0)
    assert trainer.Hyperparams(m=10, k=3).kprime == 6
    assert trainer.Hyperparams(m=10, k=7).kprime == 10


def test_lagrangian_matches_direct_recomputation():
    rng = np.random.default_rng(20)
    for _ in range(10):
        n, m, N, k = 6, 9, 12, 2
        hp = trainer.Hyperparams(m=m, k=k, lam=0.3, theta=0.7, beta=1.4)
        state = _random_state(rng, n, m, N, k)
        X = _data(rng, n, N)
        # independent recomputation, term by term
        W, Z, Q, Y = state.W.data, state.Z.data, state.Q, state.Y
        resid = X.data - W @ Z
        R = Q - W.T @ resid
        k2 = 0.0
        for i in range(N):
            sq = np.sort(Q[:, i] ** 2)[::-1]
            k2 += sq[: hp.kprime].sum()
        expected = (
            0.5 * hp.lam * k2
            + np.linalg.norm(W.T @ W - np.eye(m)) ** 2
            + 0.5 * hp.theta * np.linalg.norm(resid) ** 2
            + (Y * R).sum()
            + 0.5 * hp.beta * np.linalg.norm(R) ** 2
        )
        got = trainer.lagrangian_value(state, X, hp)
        assert abs(got - expected) <= 1e-10 * max(1.0, abs(expected))


def test_update_z_one_step_orthonormal_matches_encoder():
    # at an orthonormal dictionary with Q = Y = 0 the first gradient step
    # from zero codes selects exactly the thresholded-feature support
    rng = np.random.default_rng(21)
    n = m = 12
    N, k = 30, 3
    Wq, _ = np.linalg.qr(rng.standard_normal((n, m)))
    W = Dictionary(Wq)
    X = _data(rng, n, N)
    hp = trainer.Hyperparams(m=m, k=k, lam=0.0, theta=1.0, beta=1e-8,
                             iht_iters=1)
    state = trainer.TrainerState(W=W, Z=SparseCodeBatch(np.zeros((m, N)), k),
                                 Q=np.zeros((m, N)), Y=np.zeros((m, N)))
    Z = trainer.update_Z(state, X, hp)
    ref = encoder.encode_batch(W, X, k)
    assert np.array_equal(Z.data != 0, ref != 0)


def test_update_z_descends_and_keeps_sparsity():
    rng = np.random.default_rng(22)
    n, m, N, k = 10, 16, 40, 3
    hp = trainer.Hyperparams(m=m, k=k, lam=0.2, theta=0.5, beta=0.9,
                             iht_iters=60, iht_tol=0.0)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)

    def smooth_value(Z):
        W = state.W.data
        G = W.T @ W
        resid = X.data - W @ Z
        coupling = G @ Z - W.T @ X.data + state.Q
        return (0.5 * hp.theta * np.linalg.norm(resid) ** 2
                + (state.Y * (G @ Z)).sum()
                + 0.5 * hp.beta * np.linalg.norm(coupling) ** 2)

    Z = trainer.update_Z(state, X, hp)
    assert np.all((Z.data != 0).sum(axis=0) <= k)
    # no worse than both admissible starting points
    thr = encoder.encode_batch(state.W, X, k)
    assert smooth_value(Z.data) <= smooth_value(state.Z.data) + 1e-9
    assert smooth_value(Z.data) <= smooth_value(thr) + 1e-9


def test_update_z_repeat_never_ascends():
    rng = np.random.default_rng(23)
    n, m, N, k = 8, 12, 25, 2
    hp = trainer.Hyperparams(m=m, k=k, lam=0.1, theta=0.4, beta=1.1,
                             iht_iters=400, iht_tol=0.0)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)

    def smooth_value(Z):
        W = state.W.data
        G = W.T @ W
        resid = X.data - W @ Z
        coupling = G @ Z - W.T @ X.data + state.Q
        return (0.5 * hp.theta * np.linalg.norm(resid) ** 2
                + (state.Y * (G @ Z)).sum()
                + 0.5 * hp.beta * np.linalg.norm(coupling) ** 2)

    Z1 = trainer.update_Z(state, X, hp)
    state2 = trainer.TrainerState(W=state.W, Z=Z1, Q=state.Q, Y=state.Y)
    Z2 = trainer.update_Z(state2, X, hp)
    assert smooth_value(Z2.data) <= smooth_value(Z1.data) + 1e-9


def test_update_q_lambda_zero_is_identity_target():
    rng = np.random.default_rng(24)
    n, m, N, k = 7, 10, 15, 2
    hp = trainer.Hyperparams(m=m, k=k, lam=0.0, theta=0.3, beta=0.8)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)
    Q = trainer.update_Q(state, X, hp)
    W = state.W.data
    C = W.T @ X.data - (W.T @ W) @ state.Z.data - state.Y / hp.beta
    assert np.allclose(Q, C, atol=1e-12)


def test_update_q_matches_per_column_prox():
    from dltf import prox

    rng = np.random.default_rng(25)
    n, m, N, k = 7, 12, 9, 3
    hp = trainer.Hyperparams(m=m, k=k, lam=0.6, theta=0.3, beta=1.5)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)
    Q = trainer.update_Q(state, X, hp)
    W = state.W.data
    C = W.T @ X.data - (W.T @ W) @ state.Z.data - state.Y / hp.beta
    gamma = hp.lam / hp.beta
    for i in range(N):
        assert np.allclose(Q[:, i], prox.prox_k2(C[:, i], hp.kprime, gamma),
                           atol=1e-12)


def test_update_q_beats_plain_passthrough():
    # prox output must score no worse than the unshrunk target on the
    # Q-subproblem objective
    rng = np.random.default_rng(26)
    n, m, N, k = 6, 10, 12, 2
    hp = trainer.Hyperparams(m=m, k=k, lam=0.9, theta=0.2, beta=0.7)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)
    W = state.W.data
    C = W.T @ X.data - (W.T @ W) @ state.Z.data - state.Y / hp.beta

    def q_objective(Q):
        from dltf.prox import k2_norm_sq

        pen = sum(k2_norm_sq(Q[:, i], hp.kprime) for i in range(N))
        return 0.5 * hp.lam * pen + 0.5 * hp.beta * np.linalg.norm(Q - C) ** 2

    Q = trainer.update_Q(state, X, hp)
    assert q_objective(Q) <= q_objective(C) + 1e-9


def test_w_gradient_matches_finite_differences():
    rng = np.random.default_rng(27)
    worst = 0.0
    for trial in range(20):
        n, m, N, k = 5, 8, 11, 2
        hp = trainer.Hyperparams(m=m, k=k, lam=0.4, theta=0.6, beta=1.2)
        state = _random_state(rng, n, m, N, k)
        X = _data(rng, n, N)
        W = state.W.data + 0.05 * rng.standard_normal((n, m))
        grad = trainer.w_gradient(W, X, state.Z.data, state.Q, state.Y, hp)
        for _ in range(3):
            D = rng.standard_normal((n, m))
            D /= np.linalg.norm(D)
            h = 1e-6
            fp = trainer.w_objective(W + h * D, X, state.Z.data, state.Q,
                                     state.Y, hp)
            fm = trainer.w_objective(W - h * D, X, state.Z.data, state.Q,
                                     state.Y, hp)
            fd = (fp - fm) / (2 * h)
            an = float((grad * D).sum())
            rel = abs(fd - an) / max(1.0, abs(fd))
            worst = max(worst, rel)
    assert worst <= 1e-5


def test_update_w_descends_and_stays_unit_norm():
    rng = np.random.default_rng(28)
    for trial in range(5):
        n, m, N, k = 8, 14, 20, 3
        hp = trainer.Hyperparams(m=m, k=k, lam=0.3, theta=0.5, beta=1.0,
                                 w_iters=40)
        state = _random_state(rng, n, m, N, k)
        X = _data(rng, n, N)
        before = trainer.w_objective(state.W.data, X, state.Z.data, state.Q,
                                     state.Y, hp)
        W_new = trainer.update_W(state, X, hp)
        after = trainer.w_objective(W_new.data, X, state.Z.data, state.Q,
                                    state.Y, hp)
        assert after <= before + 1e-10 * max(1.0, abs(before))
        assert np.max(np.abs(np.linalg.norm(W_new.data, axis=0) - 1.0)) <= 1e-8


def test_update_w_near_stationary_point_stays_put():
    # gradient tolerance reached immediately: output equals input
    rng = np.random.default_rng(29)
    n, m, N, k = 6, 9, 10, 2
    hp = trainer.Hyperparams(m=m, k=k, lam=0.0, theta=0.0, beta=1e-12,
                             w_iters=50, w_grad_tol=1e30)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)
    W_new = trainer.update_W(state, X, hp)
    assert np.allclose(W_new.data, state.W.data)


def test_line_search_failed_is_a_warning_category():
    assert issubclass(LineSearchFailed, RuntimeWarning)


def test_update_y_formula():
    rng = np.random.default_rng(30)
    n, m, N, k = 6, 9, 10, 2
    hp = trainer.Hyperparams(m=m, k=k, beta=1.7)
    state = _random_state(rng, n, m, N, k)
    X = _data(rng, n, N)
    Y_new = trainer.update_Y(state, X, hp)
    W = state.W.data
    R = state.Q - W.T @ (X.data - W @ state.Z.data)
    assert np.allclose(Y_new, state.Y + hp.beta * R, atol=1e-12)


def test_train_deterministic_and_invariant():
    rng = np.random.default_rng(31)
    n, m, N, k = 10, 14, 60, 3
    X = DataMatrix(rng.standard_normal((n, N)))
    hp = trainer.Hyperparams(m=m, k=k, outer_iters=5, iht_iters=20, w_iters=10)
    W1, s1 = trainer.train(X, hp, seed=42)
    W2, s2 = trainer.train(X, hp, seed=42)
    assert W1.data.tobytes() == W2.data.tobytes()
    assert s1.Z.data.tobytes() == s2.Z.data.tobytes()
    assert np.max(np.abs(np.linalg.norm(W1.data, axis=0) - 1.0)) <= 1e-8
    assert np.all((s1.Z.data != 0).sum(axis=0) <= k)
    assert len(s1.history) == 5
    for rec in s1.history:
        for key in ("iteration", "lagrangian", "primal_residual",
                    "max_colnorm_dev", "recon_error", "wall_ms"):
            assert key in rec
        assert rec["max_colnorm_dev"] <= 1e-8


def test_train_seed_changes_result():
    rng = np.random.default_rng(32)
    X = DataMatrix(rng.standard_normal((8, 30)))
    hp = trainer.Hyperparams(m=10, k=2, outer_iters=2, iht_iters=10, w_iters=5)
    Wa, _ = trainer.train(X, hp, seed=1)
    Wb, _ = trainer.train(X, hp, seed=2)
    assert not np.allclose(Wa.data, Wb.data)


def test_train_pure_gram_reduces_coherence():
    # with lam = theta = 0 and a small beta the Gram penalty drives the
    # dictionary update, so coherence must not increase
    rng = np.random.default_rng(33)
    n, m, N, k = 12, 18, 40, 3
    X = DataMatrix(rng.standard_normal((n, N)))
    hp = trainer.Hyperparams(m=m, k=k, lam=0.0, theta=0.0, beta=1e-9,
                             outer_iters=6, iht_iters=5, w_iters=25)
    init = trainer.init_state(X, hp, seed=9)
    mu0 = guarantees.mutual_coherence(init.W).mu
    Wout, _ = trainer.train(X, hp, seed=9)
    mu1 = guarantees.mutual_coherence(Wout).mu
    assert mu1 <= mu0 + 1e-12


def test_train_orthonormal_noiseless_trends_down():
    # exactly representable data: reconstruction error and primal residual
    # should both trend down over the run
    for seed in range(5):
        rng = np.random.default_rng(200 + seed)
        n = m = 10
        N, k = 80, 2
        Wq, _ = np.linalg.qr(rng.standard_normal((n, m)))
        Ztrue = encoder.max_k_columns(rng.standard_normal((m, N)), k)
        X = DataMatrix(Wq @ Ztrue)
        hp = trainer.Hyperparams(m=m, k=k, lam=0.05, theta=0.5, beta=1.0,
                                 outer_iters=8, iht_iters=30, w_iters=15)
        _, state = trainer.train(X, hp, seed=seed)
        recon = [rec["recon_error"] for rec in state.history]
        primal = [rec["primal_residual"] for rec in state.history]
        assert recon[-1] <= recon[0] + 1e-9
        assert primal[-1] <= primal[0] + 1e-9


def test_train_history_iterations_are_sequential():
    rng = np.random.default_rng(34)
    X = DataMatrix(rng.standard_normal((6, 30)))
    hp = trainer.Hyperparams(m=8, k=2, outer_iters=4, iht_iters=10, w_iters=5)
    _, state = trainer.train(X, hp, seed=3)
    assert [rec["iteration"] for rec in state.history] == [1, 2, 3, 4]
