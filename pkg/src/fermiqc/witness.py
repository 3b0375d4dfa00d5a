"""Optimal entanglement witnesses by sampled-constraint SDP.

The witness set is {W Hermitian on the sector : W <= Identity, and
contract_witness(W, cs) >= 0 for every tuple cs of n-1 single-particle
vectors}.  The generalized robustness of a state is max(0, -min Tr(W rho))
over that set.  The continuum of contraction constraints is replaced by a
finite Haar sample, then refined: after each solve a direct search looks
for a single-determinant state on which the witness goes negative, and any
violation found is appended as a new constraint before re-solving.  The
reported value therefore upper-bounds the true robustness, and a fresh
validation sweep quantifies how close the returned W is to a valid witness.

Each contracted block K W K! has the tuple's own vectors in its kernel
(creating an already-present single-particle state annihilates the
determinant), so the blocks are compressed onto the orthogonal complement
of the tuple before entering the solver; this keeps the interior-point
iterates strictly feasible and shrinks the blocks to (d-n+1) x (d-n+1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import fock, sdp
from .states import DensityState


@dataclass
class WitnessConfig:
    samples: int | None = None      # default chosen from the sector dimension
    seed: int = 0
    rounds: int = 5
    restarts: int = 32
    cuts_per_round: int = 16
    violation_tol: float = 5e-4
    backend: str = "auto"           # auto | ipm | fo
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    accuracy: float = 1e-2          # first-order stopping accuracy
    fo_max_iter: int = 20000
    validation_samples: int = 10000

    def resolve_samples(self, d: int, n: int) -> int:
        if self.samples is not None:
            if self.samples < 1:
                raise ValueError("sample count must be at least 1")
            return self.samples
        D = fock.sector_dimension(d, n)
        return int(min(3000, max(800, 40 * D)))


@dataclass
class WitnessResult:
    W: np.ndarray
    objective: float
    robustness: float
    validation_min: float
    search_min: float
    max_eigenvalue: float
    rounds_used: int
    constraints_per_round: list = field(default_factory=list)
    status: str = "optimal"
    mixing_state: np.ndarray | None = None
    solution: sdp.SdpSolution | None = None

    def report(self) -> dict:
        return {
            "objective": self.objective,
            "robustness": self.robustness,
            "min_validation_value": self.validation_min,
            "rounds": self.rounds_used,
            "constraints_added": int(sum(self.constraints_per_round[1:])),
            "status": self.status,
        }


def one_body_density(rho: DensityState) -> np.ndarray:
    """gamma[p, q] = Tr(rho f!_q f_p); Hermitian with trace n."""
    d, n, op = rho.d, rho.n, rho.op
    ann = [fock.annihilation_matrix(d, n, p) for p in range(d)]
    gamma = np.empty((d, d), dtype=np.complex128)
    for p in range(d):
        rp = ann[p] @ op
        for q in range(d):
            gamma[p, q] = np.trace(rp @ ann[q].T)
    return gamma


def natural_orbital_tuples(rho: DensityState) -> list:
    """Constraint tuples spanned by the state's natural orbitals.

    Every (n-1)-subset of the eigenvectors of the one-body density matrix.
    Sampled Haar tuples cover the Grassmannian uniformly but miss the
    specific planes a nearly-separable state occupies; these seeds place
    constraints exactly there.  For a determinant state the top-occupation
    subset forces Tr(W rho) >= 0, making the reported robustness exact.
    """
    _, vecs = np.linalg.eigh(one_body_density(rho))
    phi = vecs[:, ::-1].T                    # rows, descending occupation
    return [np.ascontiguousarray(phi[list(sub), :])
            for sub in itertools.combinations(range(rho.d), rho.n - 1)]


def sample_slater_constraints(d: int, n: int, M: int, seed=0) -> np.ndarray:
    """M tuples of n-1 Haar-uniform unit vectors, shape (M, n-1, d).

    Draws are consumed sample by sample, so for a fixed seed the first M'
    tuples of a larger batch coincide with the M'-tuple batch: constraint
    sets at increasing M are nested.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    z = rng.normal(size=(M, n - 1, d, 2))
    cs = z[..., 0] + 1j * z[..., 1]
    cs /= np.linalg.norm(cs, axis=2, keepdims=True)
    return cs


def _tuple_complement(cs: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of span(cs rows), shape (d, d-n+1)."""
    U, _, _ = np.linalg.svd(cs.T, full_matrices=True)
    return U[:, cs.shape[0]:]


def compressed_kernel(d: int, n: int, cs: np.ndarray) -> np.ndarray:
    """Contraction kernel projected off the tuple's forced nullspace.

    K W K! >= 0 on C^d is equivalent to Q! K W K! Q >= 0 with Q spanning the
    complement of the tuple, because the tuple vectors always lie in the
    kernel of K!.
    """
    K = fock.contraction_operator(d, n, cs)
    Q = _tuple_complement(np.asarray(cs))
    return Q.conj().T @ K


def assemble_witness_sdp(rho, constraints, d: int | None = None,
                         n: int | None = None) -> sdp.SdpProblem:
    """Sampled witness problem: min Tr(W rho), W <= I, contracted blocks PSD."""
    if isinstance(rho, DensityState):
        d, n, op = rho.d, rho.n, rho.op
    else:
        if d is None or n is None:
            raise ValueError("pass d and n along with a bare matrix")
        op = np.asarray(rho)
    constraints = list(constraints)
    if not constraints:
        raise ValueError("at least one sampled constraint is required")
    D = fock.sector_dimension(d, n)
    blocks = [sdp.ContractionBlock(np.eye(D), sign=-1.0, const=np.eye(D))]
    for cs in constraints:
        blocks.append(sdp.ContractionBlock(compressed_kernel(d, n, cs)))
    return sdp.SdpProblem(num_vars=D * D, c=sdp.herm_to_vec(op), blocks=blocks)


def slater_diagonal_value(d: int, n: int, W: np.ndarray, coeffs: np.ndarray) -> float:
    """<s|W|s> for the determinant state of the given coefficient columns."""
    amps, _ = fock.slater_state(d, coeffs)
    return float(np.real(amps.conj() @ (W @ amps)))


def _violation_candidates(d: int, n: int, W: np.ndarray, restarts: int,
                          rng, max_sweeps: int = 40, rtol: float = 1e-11):
    """One descent result per Haar-random restart, as (frame, value) pairs."""
    out = []
    for _ in range(restarts):
        G = rng.normal(size=(d, n)) + 1j * rng.normal(size=(d, n))
        frame, _ = np.linalg.qr(G)
        frame = np.array(frame)
        val = np.inf
        prev = np.inf
        for _ in range(max_sweeps):
            for k in range(n):
                others = np.delete(frame, k, axis=1).T  # (n-1, d) tuple
                K = fock.contraction_operator(d, n, others)
                Q = _tuple_complement(others)
                B = Q.conj().T @ (K @ W @ K.conj().T) @ Q
                lam, vec = np.linalg.eigh(0.5 * (B + B.conj().T))
                frame[:, k] = Q @ vec[:, 0]
                val = float(lam[0])
            if prev - val < rtol * max(1.0, abs(val)):
                break
            prev = val
        out.append((frame, val))
    return out


def find_violating_slater(d: int, n: int, W: np.ndarray, restarts: int = 32,
                          seed=0, max_sweeps: int = 40,
                          rtol: float = 1e-11):
    """Search for the determinant state minimizing <s|W|s>.

    Alternating optimization over an orthonormal n-frame: with all vectors
    but one fixed, the contracted block is exact and the optimal remaining
    vector is its minimal eigenvector on the complement of the fixed ones.
    Restarted from Haar-random frames; returns (coefficient columns (d, n),
    value) for the best frame found.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    cands = _violation_candidates(d, n, W, restarts, rng, max_sweeps, rtol)
    frame, val = min(cands, key=lambda fv: fv[1])
    return frame, float(val)


def _fresh_cuts(candidates, n, tol, cap):
    """Leave-one-out tuples of the violating frames, deduplicated by span."""
    cuts, projs = [], []
    for frame, val in sorted(candidates, key=lambda fv: fv[1]):
        if val >= -tol or len(cuts) >= cap:
            break
        for k in range(n):
            cols = np.delete(frame, k, axis=1)       # (d, n-1), orthonormal
            P = cols @ cols.conj().T
            if any(np.linalg.norm(P - Pk) < 1e-4 for Pk in projs):
                continue
            cuts.append(np.ascontiguousarray(cols.T))
            projs.append(P)
            if len(cuts) >= cap:
                break
    return cuts


def validate_witness(d: int, n: int, W: np.ndarray, samples: int = 10000,
                     seed=0, chunk: int = 512):
    """Min of <s|W|s> over fresh Haar determinant states, plus max eig of W.

    Batched: QR-orthonormalized Gaussian frames, determinant amplitudes,
    then one quadratic form per sample.
    """
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    best = np.inf
    for start in range(0, samples, chunk):
        count = min(chunk, samples - start)
        G = rng.normal(size=(count, d, n)) + 1j * rng.normal(size=(count, d, n))
        frames, _ = np.linalg.qr(G)
        amps = fock.slater_amplitudes_batch(d, frames)
        vals = np.real(np.einsum("ti,ti->t", amps.conj() @ W, amps))
        best = min(best, float(vals.min()))
    max_eig = float(np.linalg.eigvalsh(0.5 * (W + W.conj().T)).max())
    return best, max_eig


def optimal_witness(rho: DensityState, cfg: WitnessConfig | None = None) -> WitnessResult:
    """Sampled witness optimization with cutting-plane refinement.

    Solves the assembled problem, searches for violated determinant states,
    appends them as constraints and re-solves, up to cfg.rounds times; the
    final report carries the fresh-sample validation minimum alongside the
    search minimum.  The dual multiplier of the W <= I block, normalized,
    is the certified mixing state: rho plus robustness times it is a
    (scaled) mixture of sampled determinants.
    """
    cfg = cfg or WitnessConfig()
    d, n = rho.d, rho.n
    D = fock.sector_dimension(d, n)
    M = cfg.resolve_samples(d, n)
    constraints = natural_orbital_tuples(rho) + list(
        sample_slater_constraints(d, n, M, cfg.seed))
    counts = [len(constraints)]
    solve_cfg = sdp.SdpConfig(
        gap_tol=cfg.gap_tol, feas_tol=cfg.feas_tol,
        accuracy=cfg.accuracy, fo_max_iter=cfg.fo_max_iter,
    )
    x_feasible = sdp.herm_to_vec(0.5 * np.eye(D))
    warm = None
    search_rng = np.random.default_rng((cfg.seed, 1))
    sol = None
    W = np.zeros((D, D), dtype=np.complex128)
    rounds_used = 0
    search_min = np.inf
    for round_idx in range(cfg.rounds + 1):
        problem = assemble_witness_sdp(rho, constraints)
        fo_kwargs = dict(
            strictly_feasible_x=x_feasible,
            norm_bound=4.0 * np.sqrt(D),
            warm=warm,
        )
        if cfg.backend == "ipm":
            sol = sdp.solve_ipm(problem, solve_cfg)
        elif cfg.backend == "fo":
            sol = sdp.solve_first_order(problem, solve_cfg, **fo_kwargs)
        else:
            sol = sdp.solve_auto(problem, solve_cfg, **fo_kwargs)
        W = sdp.vec_to_herm(sol.x, D)
        rounds_used = round_idx + 1
        candidates = _violation_candidates(d, n, W, cfg.restarts, search_rng)
        search_min = float(min(val for _, val in candidates))
        if search_min >= -cfg.violation_tol or round_idx == cfg.rounds:
            break
        cuts = _fresh_cuts(candidates, n, cfg.violation_tol, cfg.cuts_per_round)
        constraints.extend(cuts)
        counts.append(len(cuts))
        if sol.backend == "fo":
            dim_t = d - n + 1
            P_tuples = np.zeros((len(constraints), dim_t, dim_t), dtype=np.complex128)
            for i, xx in enumerate(sol.dual_blocks[1:]):
                P_tuples[i] = -xx
            warm = (sol.x.copy(), [-sol.dual_blocks[0][None, :, :], P_tuples])

    objective = float(np.real(np.trace(W @ rho.op)))
    robustness = max(0.0, -objective)
    val_rng = np.random.default_rng((cfg.seed, 2))
    validation_min, max_eig = validate_witness(
        d, n, W, samples=cfg.validation_samples, seed=val_rng)

    mixing = None
    Z0 = sol.dual_blocks[0]
    if Z0 is not None:
        tr = float(np.trace(Z0).real)
        if tr > 1e-8:
            mixing = np.asarray(Z0) / tr
    return WitnessResult(
        W=W,
        objective=objective,
        robustness=robustness,
        validation_min=min(validation_min, search_min),
        search_min=search_min,
        max_eigenvalue=max_eig,
        rounds_used=rounds_used,
        constraints_per_round=counts,
        status=sol.status,
        mixing_state=mixing,
        solution=sol,
    )


def separable_upper_bound(rho: DensityState, samples: int = 10000, seed=0,
                          active_start: int = 400, add_per_round: int = 200,
                          max_rounds: int = 60, tol: float = 1e-5,
                          search_restarts: int = 16) -> float:
    """Primal inner approximation of the robustness by column generation.

    Minimizes sum(lambda) - 1 over nonnegative weights with
    sum_i lambda_i P_i - rho >= 0, the P_i ranging over determinant
    projectors; any feasible mixture upper-bounds the true robustness.
    Columns start from natural-orbital determinants plus the Haar samples
    with the largest overlap with rho.  Pricing runs in two stages: batch
    reduced costs 1 - <P_i, Y> over the remaining samples, then, when the
    pool is exhausted, a continuum search for the determinant minimizing
    the reduced cost (a witness search on Identity - Y), so the result is
    not limited by the sample resolution.
    """
    d, n, op = rho.d, rho.n, rho.op
    D = fock.sector_dimension(d, n)
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    G = rng.normal(size=(samples, d, n)) + 1j * rng.normal(size=(samples, d, n))
    frames, _ = np.linalg.qr(G)
    pool = fock.slater_amplitudes_batch(d, frames)
    overlaps = np.real(np.einsum("ti,ti->t", pool.conj() @ op, pool))
    order = np.argsort(-overlaps)

    _, nat = np.linalg.eigh(one_body_density(rho))
    nat = nat[:, ::-1]
    seeds = [fock.slater_state(d, nat[:, list(sub)])[0]
             for sub in itertools.combinations(range(d), n)]
    columns = seeds + [pool[i] for i in order[:active_start]]
    remaining = set(range(samples)) - set(int(i) for i in order[:active_start])

    value = np.nan
    for _ in range(max_rounds):
        amps = np.array(columns)
        P = np.einsum("ti,tj->tij", amps, amps.conj())
        k = len(columns)
        prob = sdp.SdpProblem(
            num_vars=k, c=np.ones(k),
            blocks=[sdp.DenseBlock(-op.astype(np.complex128), P),
                    sdp.DiagBlock(np.eye(k), np.zeros(k))],
            objective_offset=-1.0,
        )
        sol = sdp.solve_ipm(prob)
        if sol.status != "optimal":
            if np.isnan(value):
                raise RuntimeError(
                    f"inner-approximation solve ended with {sol.status}")
            break       # keep the last solved mixture; it is still feasible
        value = sol.primal_objective
        Y = sol.dual_blocks[0]
        if remaining:
            rem = np.fromiter(remaining, dtype=int)
            reduced = 1.0 - np.real(
                np.einsum("ti,ti->t", pool[rem].conj() @ Y, pool[rem]))
            violated = rem[reduced < -tol]
            if violated.size:
                worst = violated[np.argsort(reduced[reduced < -tol])][:add_per_round]
                columns.extend(pool[int(i)] for i in worst)
                remaining -= set(int(i) for i in worst)
                continue
            remaining = set()
        cands = _violation_candidates(d, n, np.eye(D) - Y, search_restarts, rng)
        fresh = []
        for fr, val in sorted(cands, key=lambda fv: fv[1])[:8]:
            if val >= -tol:
                break
            a = fock.slater_state(d, fr)[0]
            ov = np.abs(np.array(columns + fresh) @ a.conj()) ** 2
            if ov.max() < 1.0 - 1e-7:
                fresh.append(a)
        if not fresh:
            break
        columns.extend(fresh)
    return float(value)
