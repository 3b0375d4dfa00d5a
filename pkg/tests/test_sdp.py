"""Solver tests: toy problems with known optima, an eigensolver oracle for
random instances, backend agreement, and the real-embedding equivalences."""

import numpy as np
import pytest

from fermiqc import sdp


def _random_density(rng, D):
    A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def _dense_from_contraction(blk, m):
    Fst = np.zeros((m, blk.dim, blk.dim), dtype=complex)
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        Fst[i] = blk.sign * (blk.K @ sdp.vec_to_herm(e, blk.var_dim) @ blk.K.conj().T)
    return sdp.DenseBlock(blk.const, Fst)


def _eigen_min_problem(C):
    """min <C, X> s.t. Tr X = 1, X >= 0, as a dense-block problem."""
    D = C.shape[0]
    m = D * D
    Fst = np.zeros((m, D, D), dtype=complex)
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        Fst[i] = sdp.vec_to_herm(e, D)
    return sdp.SdpProblem(
        num_vars=m,
        c=sdp.herm_to_vec(C),
        blocks=[sdp.DenseBlock(np.zeros((D, D), dtype=complex), Fst)],
        eq_A=sdp.herm_to_vec(np.eye(D))[None, :],
        eq_b=np.array([1.0]),
    )


# ---------------------------------------------------------------------------
# coordinates and realify
# ---------------------------------------------------------------------------

def test_herm_vec_roundtrip_and_inner_product():
    rng = np.random.default_rng(3)
    for D in (1, 2, 5, 9):
        A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
        H = 0.5 * (A + A.conj().T)
        x = sdp.herm_to_vec(H)
        assert x.shape == (D * D,)
        assert np.abs(sdp.vec_to_herm(x, D) - H).max() < 1e-13
        B = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
        G = 0.5 * (B + B.conj().T)
        y = sdp.herm_to_vec(G)
        assert np.trace(H @ G).real == pytest.approx(x @ y, abs=1e-12)


def test_realify_diag_example():
    R = sdp.realify(np.diag([1.0, -1.0]))
    assert np.allclose(np.sort(np.linalg.eigvalsh(R)), [-1, -1, 1, 1])
    assert np.allclose(R, R.T)


def test_realify_doubles_spectrum():
    rng = np.random.default_rng(11)
    for D in (2, 4, 7):
        A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
        H = 0.5 * (A + A.conj().T)
        ev = np.linalg.eigvalsh(H)
        ev2 = np.linalg.eigvalsh(sdp.realify(H))
        assert np.abs(np.sort(np.repeat(ev, 2)) - ev2).max() < 1e-10


def test_realified_problem_matches_complex_solve():
    rng = np.random.default_rng(5)
    for D in (3, 5):
        A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
        C = 0.5 * (A + A.conj().T)
        prob = _eigen_min_problem(C)
        sol = sdp.solve_ipm(prob)
        re_prob = sdp.realify_problem(prob)
        re_sol = sdp.solve_ipm(re_prob)
        assert sol.status == "optimal" and re_sol.status == "optimal"
        # same variable space, so objectives agree directly
        assert re_sol.primal_objective == pytest.approx(sol.primal_objective, abs=1e-6)
        # block spectra of the embedded solve are the doubled multiset
        S = prob.blocks[0].evaluate(sol.x)
        S_re = re_prob.blocks[0].evaluate(re_sol.x)
        ev = np.sort(np.repeat(np.linalg.eigvalsh(S), 2))
        ev_re = np.sort(np.linalg.eigvalsh(S_re))
        assert np.abs(ev - ev_re).max() < 1e-5


# ---------------------------------------------------------------------------
# toy problems with pinned optima
# ---------------------------------------------------------------------------

def test_diagonal_bound_toy():
    # min x1 + x2 with diag(x1, x2) >= I has optimum 2
    F0 = -np.eye(2, dtype=complex)
    F = np.zeros((2, 2, 2), dtype=complex)
    F[0, 0, 0] = 1
    F[1, 1, 1] = 1
    sol = sdp.solve_ipm(
        sdp.SdpProblem(num_vars=2, c=np.array([1.0, 1.0]), blocks=[sdp.DenseBlock(F0, F)])
    )
    assert sol.status == "optimal"
    assert sol.primal_objective == pytest.approx(2.0, abs=1e-6)
    assert sol.gap <= 1e-7
    assert sol.x == pytest.approx([1.0, 1.0], abs=1e-5)


def test_min_eigenvalue_frozen_instance():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    C = 0.5 * (A + A.conj().T)
    sol = sdp.solve_ipm(_eigen_min_problem(C))
    assert sol.status == "optimal"
    # oracle: dense eigensolver on this seeded instance
    assert sol.primal_objective == pytest.approx(-2.765736052780689, abs=1e-6)
    assert sol.primal_objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-6)


def test_bounded_witness_toy():
    # min Tr(W rho) over -I <= W <= I is -1, reached at W = -I
    rng = np.random.default_rng(42)
    rho = _random_density(rng, 3)
    blocks = [
        sdp.ContractionBlock(np.eye(3), sign=-1.0, const=np.eye(3)),
        sdp.ContractionBlock(np.eye(3), sign=+1.0, const=np.eye(3)),
    ]
    sol = sdp.solve_ipm(sdp.SdpProblem(num_vars=9, c=sdp.herm_to_vec(rho), blocks=blocks))
    assert sol.status == "optimal"
    assert sol.primal_objective == pytest.approx(-1.0, abs=1e-6)
    W = sdp.vec_to_herm(sol.x, 3)
    assert np.abs(W + np.eye(3)).max() < 1e-4


def test_random_instances_against_eigensolver():
    rng = np.random.default_rng(123)
    for trial in range(50):
        D = int(rng.integers(2, 7))
        A = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
        C = 0.5 * (A + A.conj().T)
        sol = sdp.solve_ipm(_eigen_min_problem(C))
        assert sol.status == "optimal"
        assert sol.primal_objective == pytest.approx(
            np.linalg.eigvalsh(C)[0], abs=1e-6
        ), f"trial {trial}"
        assert sol.gap <= 1e-7
        assert sol.primal_residual <= 1e-7
        assert sol.dual_residual <= 1e-6


# ---------------------------------------------------------------------------
# solver invariants
# ---------------------------------------------------------------------------

def _witness_like_problem(rng, Dv=6, dim=3, count=40):
    rho = _random_density(rng, Dv)
    rho = 0.2 * rho + 0.8 * _random_density(rng, Dv)
    blocks = [sdp.ContractionBlock(np.eye(Dv), sign=-1.0, const=np.eye(Dv))]
    for _ in range(count):
        K = rng.normal(size=(dim, Dv)) + 1j * rng.normal(size=(dim, Dv))
        blocks.append(sdp.ContractionBlock(K / np.linalg.norm(K)))
    return sdp.SdpProblem(num_vars=Dv * Dv, c=sdp.herm_to_vec(rho), blocks=blocks)


def test_weak_duality_along_iterates():
    prob = _witness_like_problem(np.random.default_rng(9))
    sol = sdp.solve_ipm(prob)
    assert sol.status == "optimal"
    for pobj, dobj, gap, *_ in sol.iterate_log:
        assert dobj <= pobj + 1e-12
        assert gap >= -1e-12


def test_block_permutation_invariance():
    rng = np.random.default_rng(17)
    prob = _witness_like_problem(rng)
    sol = sdp.solve_ipm(prob)
    perm = np.random.default_rng(4).permutation(len(prob.blocks))
    prob_p = sdp.SdpProblem(
        num_vars=prob.num_vars, c=prob.c, blocks=[prob.blocks[i] for i in perm]
    )
    sol_p = sdp.solve_ipm(prob_p)
    assert abs(sol.primal_objective - sol_p.primal_objective) <= 1e-8


def test_structured_blocks_match_dense_expansion():
    rng = np.random.default_rng(7)
    prob = _witness_like_problem(rng, count=12)
    dense = sdp.SdpProblem(
        num_vars=prob.num_vars,
        c=prob.c,
        blocks=[_dense_from_contraction(b, prob.num_vars) for b in prob.blocks],
    )
    s1, s2 = sdp.solve_ipm(prob), sdp.solve_ipm(dense)
    assert abs(s1.primal_objective - s2.primal_objective) < 1e-9


def test_deterministic_repeat():
    prob = _witness_like_problem(np.random.default_rng(21))
    a = sdp.solve_ipm(prob)
    b = sdp.solve_ipm(prob)
    assert a.primal_objective == b.primal_objective
    assert np.array_equal(a.x, b.x)


def test_dual_blocks_are_psd_multipliers():
    prob = _witness_like_problem(np.random.default_rng(33))
    sol = sdp.solve_ipm(prob)
    assert sol.status == "optimal"
    for Zb in sol.dual_blocks:
        assert np.linalg.eigvalsh(Zb).min() > -1e-9
    # stationarity: c = sum_j A_j*(Z_j) up to the dual residual
    resid = prob.c.copy()
    for blk, Zb in zip(prob.blocks, sol.dual_blocks):
        resid = resid - blk.adjoint(Zb)
    assert np.linalg.norm(resid) < 1e-6


def test_equality_elimination_matches_manual_reduction():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    C = 0.5 * (A + A.conj().T)
    sol = sdp.solve_ipm(_eigen_min_problem(C))
    assert sol.primal_objective == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-6)
    # the returned x satisfies the eliminated constraint
    X = sdp.vec_to_herm(sol.x, 4)
    assert np.trace(X).real == pytest.approx(1.0, abs=1e-8)
    assert np.linalg.eigvalsh(X).min() > -1e-8


# ---------------------------------------------------------------------------
# statuses
# ---------------------------------------------------------------------------

def test_infeasible_detection_constant_block():
    F0 = -np.ones((1, 1), dtype=complex)
    F = np.zeros((1, 1, 1), dtype=complex)
    sol = sdp.solve_ipm(
        sdp.SdpProblem(num_vars=1, c=np.array([1.0]), blocks=[sdp.DenseBlock(F0, F)])
    )
    assert sol.status == "infeasible-detected"


def test_infeasible_detection_contradictory_bounds():
    # x >= 1 together with x <= -1
    blocks = [
        sdp.DenseBlock(-np.ones((1, 1), dtype=complex), np.ones((1, 1, 1), dtype=complex)),
        sdp.DenseBlock(-np.ones((1, 1), dtype=complex), -np.ones((1, 1, 1), dtype=complex)),
    ]
    sol = sdp.solve_ipm(sdp.SdpProblem(num_vars=1, c=np.array([0.0]), blocks=blocks))
    assert sol.status == "infeasible-detected"


def test_max_iterations_status():
    prob = _witness_like_problem(np.random.default_rng(10))
    sol = sdp.solve_ipm(prob, sdp.SdpConfig(max_iter=2))
    assert sol.status == "max-iterations"


def test_input_validation():
    with pytest.raises(ValueError):
        sdp.DenseBlock(np.array([[1.0, 1.0]]), np.zeros((1, 1, 1)))
    with pytest.raises(ValueError):
        sdp.DenseBlock(np.array([[0.0, 1.0], [0.0, 0.0]]), np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        sdp.SdpProblem(num_vars=2, c=np.zeros(3), blocks=[])
    with pytest.raises(ValueError):
        sdp.SdpProblem(
            num_vars=5, c=np.zeros(5), blocks=[sdp.ContractionBlock(np.eye(3))]
        )
    with pytest.raises(ValueError):
        sdp.vec_to_herm(np.zeros(5), 2)


# ---------------------------------------------------------------------------
# first-order backend
# ---------------------------------------------------------------------------

def test_first_order_matches_interior_point():
    rng = np.random.default_rng(14)
    for trial in range(4):
        prob = _witness_like_problem(rng, count=50)
        si = sdp.solve_ipm(prob)
        sf = sdp.solve_first_order(
            prob,
            sdp.SdpConfig(accuracy=5e-3, fo_max_iter=20000),
            strictly_feasible_x=sdp.herm_to_vec(0.5 * np.eye(6)),
        )
        assert si.status == "optimal"
        assert abs(sf.primal_objective - si.primal_objective) <= 1e-2, f"trial {trial}"
        # the restored iterate is exactly feasible and the bound brackets truth
        assert sf.dual_bound <= si.primal_objective + 1e-9
        assert sf.primal_objective >= si.primal_objective - 1e-9


def test_first_order_deterministic_and_warmstartable():
    prob = _witness_like_problem(np.random.default_rng(15), count=30)
    cfg = sdp.SdpConfig(accuracy=1e-3, fo_max_iter=3000)
    xsf = sdp.herm_to_vec(0.5 * np.eye(6))
    a = sdp.solve_first_order(prob, cfg, strictly_feasible_x=xsf)
    b = sdp.solve_first_order(prob, cfg, strictly_feasible_x=xsf)
    assert np.array_equal(a.x, b.x)
    groups_P = [np.zeros((1, 6, 6), dtype=complex), np.zeros((30, 3, 3), dtype=complex)]
    warm = sdp.solve_first_order(
        prob, sdp.SdpConfig(accuracy=1e-3, fo_max_iter=500),
        warm=(a.x, groups_P), strictly_feasible_x=xsf,
    )
    assert abs(warm.primal_objective - a.primal_objective) < 5e-3


def test_auto_dispatch_by_block_size():
    small = sdp.SdpProblem(
        num_vars=1, c=np.array([1.0]),
        blocks=[sdp.DenseBlock(np.eye(3, dtype=complex), np.eye(3, dtype=complex)[None])],
    )
    sol = sdp.solve_auto(small)
    assert sol.backend == "ipm"
    assert sol.primal_objective == pytest.approx(-1.0, abs=1e-6)
    big = sdp.SdpProblem(
        num_vars=1, c=np.array([1.0]),
        blocks=[sdp.DenseBlock(np.eye(81, dtype=complex), np.eye(81, dtype=complex)[None])],
    )
    sol = sdp.solve_auto(big, sdp.SdpConfig(accuracy=1e-3),
                         strictly_feasible_x=np.zeros(1))
    assert sol.backend == "fo"
    assert sol.primal_objective == pytest.approx(-1.0, abs=1e-2)
    assert sdp.solve_auto(small, backend="ipm").backend == "ipm"
    with pytest.raises(ValueError):
        sdp.solve_auto(small, backend="nope")


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------

def test_dump_and_load_roundtrip(tmp_path):
    rng = np.random.default_rng(77)
    prob = _witness_like_problem(rng, Dv=4, dim=2, count=3)
    path = tmp_path / "problem.txt"
    sdp.dump_problem(prob, str(path))
    text = path.read_text().splitlines()
    assert text[0] == "sdp m=16 blocks=4"
    loaded = sdp.load_problem(str(path))
    s1, s2 = sdp.solve_ipm(prob), sdp.solve_ipm(loaded)
    assert abs(s1.primal_objective - s2.primal_objective) < 1e-9
