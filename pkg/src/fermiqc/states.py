"""State constructors on fixed-particle-number fermionic sectors.

All constructors return a DensityState: the sector density matrix together
with a provenance tag (family name, parameters, seed) so that runs are
reproducible from their outputs.  Randomness always flows through an
explicit seed or generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fock

GAUSSIAN_WIDTH = 0.1826


@dataclass
class DensityState:
    """A density matrix on the (d, n) sector plus provenance metadata."""

    d: int
    n: int
    op: np.ndarray
    metadata: dict = field(default_factory=dict)
    vector: np.ndarray | None = None  # amplitudes when the state is pure

    def validate(self, atol: float = 1e-10) -> None:
        D = fock.sector_dimension(self.d, self.n)
        if self.op.shape != (D, D):
            raise ValueError(f"operator shape {self.op.shape} does not match sector dim {D}")
        if np.abs(self.op - self.op.conj().T).max() > 1e-12:
            raise ValueError("operator is not Hermitian")
        tr = np.trace(self.op).real
        if abs(tr - 1.0) > atol:
            raise ValueError(f"trace {tr} is not 1")
        if np.linalg.eigvalsh(self.op).min() < -atol:
            raise ValueError("operator has a negative eigenvalue")


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _pure_state(d, n, amplitudes, meta) -> DensityState:
    v = np.asarray(amplitudes, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return DensityState(d=d, n=n, op=np.outer(v, v.conj()), metadata=meta, vector=v)


# ---------------------------------------------------------------------------
# elementary constructors
# ---------------------------------------------------------------------------

def slater_projector(d: int, coeffs: np.ndarray) -> DensityState:
    """Rank-1 projector onto the single-determinant state with the given
    d x n single-particle coefficient columns."""
    amps, canon = fock.slater_state(d, coeffs)
    n = canon.shape[1]
    return _pure_state(d, n, amps, {"family": "slater", "d": d, "n": n})


def random_pure(d: int, n: int, seed=0) -> DensityState:
    """Haar-uniform pure state on the sector sphere."""
    rng = _as_rng(seed)
    D = fock.sector_dimension(d, n)
    v = rng.normal(size=D) + 1j * rng.normal(size=D)
    return _pure_state(d, n, v, {"family": "haar-pure", "d": d, "n": n, "seed": seed})


def random_mixed(d: int, n: int, rank: int | None = None, seed=0) -> DensityState:
    """Mixed state G G!/Tr(G G!) with G a D x rank complex Gaussian matrix."""
    rng = _as_rng(seed)
    D = fock.sector_dimension(d, n)
    r = D if rank is None else int(rank)
    if not 1 <= r <= D:
        raise ValueError(f"rank must be in [1, {D}]")
    G = rng.normal(size=(D, r)) + 1j * rng.normal(size=(D, r))
    rho = G @ G.conj().T
    rho /= np.trace(rho).real
    return DensityState(
        d=d, n=n, op=rho,
        metadata={"family": "ginibre", "d": d, "n": n, "rank": r, "seed": seed},
    )


def random_slater_coeffs(d: int, n: int, rng) -> np.ndarray:
    """Haar-random orthonormal d x n coefficient block (QR of a Gaussian)."""
    G = rng.normal(size=(d, n)) + 1j * rng.normal(size=(d, n))
    q, r = np.linalg.qr(G)
    phase = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phase.conj()


def random_separable(d: int, n: int, k: int, seed=0) -> DensityState:
    """Convex mixture of k Haar-random Slater projectors with Dirichlet weights."""
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = _as_rng(seed)
    weights = rng.dirichlet(np.ones(k))
    D = fock.sector_dimension(d, n)
    rho = np.zeros((D, D), dtype=np.complex128)
    for w in weights:
        amps = fock.slater_amplitudes(d, random_slater_coeffs(d, n, rng))
        rho += w * np.outer(amps, amps.conj())
    return DensityState(
        d=d, n=n, op=rho,
        metadata={"family": "separable", "d": d, "n": n, "terms": k, "seed": seed},
    )


def max_entangled(L: int) -> DensityState:
    """Singlet-type maximally entangled two-fermion state on d = 2L modes.

    Pairing convention: mode 2k is (orbital k, up), mode 2k+1 is
    (orbital k, down); the state is (1/sqrt(L)) sum_k f!_{2k} f!_{2k+1} |0>.
    """
    if L < 2:
        raise ValueError("L must be at least 2")
    d = 2 * L
    index = fock.basis_index(d, 2)
    v = np.zeros(fock.sector_dimension(d, 2), dtype=np.complex128)
    for k in range(L):
        mask = (1 << (2 * k)) | (1 << (2 * k + 1))
        v[index[mask]] = 1.0
    v /= np.sqrt(L)
    return _pure_state(d, 2, v, {"family": "max-entangled", "L": L})


# ---------------------------------------------------------------------------
# one-parameter families
# ---------------------------------------------------------------------------

@dataclass
class FamilyParams:
    """Parameters of the Gaussian-weight interpolation family."""

    p: float
    L: int
    delta: float = GAUSSIAN_WIDTH

    def weights(self) -> np.ndarray:
        """Normalized weights of (slater, max-entangled, maximally mixed)."""
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        raw = np.exp(-((self.p - np.array([0.0, 0.5, 1.0])) ** 2) / self.delta**2)
        return raw / raw.sum()


def family_gaussian(params: FamilyParams) -> DensityState:
    """Gaussian-weight mixture sweeping Slater -> maximally entangled -> mixed.

    The three components are a fixed Slater projector on modes {0, 2}
    (distinct orbitals, both up), max_entangled(L), and the normalized
    identity on the sector; the weight on each is a Gaussian in p centred
    at 0, 1/2 and 1 respectively, normalized to unit total.
    """
    d, n = 2 * params.L, 2
    D = fock.sector_dimension(d, n)
    coeffs = np.zeros((d, 2), dtype=np.complex128)
    coeffs[0, 0] = 1.0
    coeffs[2, 1] = 1.0
    sigma = slater_projector(d, coeffs).op
    rho_max = max_entangled(params.L).op
    w = params.weights()
    op = w[0] * sigma + w[1] * rho_max + w[2] * np.eye(D) / D
    return DensityState(
        d=d, n=n, op=op,
        metadata={"family": "gaussian", "p": params.p, "L": params.L,
                  "delta": params.delta, "weights": w.tolist()},
    )


def family_linear(p: float) -> DensityState:
    """Normalized (1-p) * Identity + p * max_entangled(2) on d=4.

    The identity enters unnormalized and the whole mixture is rescaled by
    its trace 6 - 5p, so the effective weight on the entangled projector
    is p / (6 - 5p); the separability threshold of the path sits at
    p = 0.8 in this parametrization.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rho_max = max_entangled(2).op
    op = ((1.0 - p) * np.eye(6) + p * rho_max) / (6.0 - 5.0 * p)
    return DensityState(d=4, n=2, op=op, metadata={"family": "linear", "p": p})


# ---------------------------------------------------------------------------
# local single-particle channels
# ---------------------------------------------------------------------------

def exterior_power(d: int, n: int, M: np.ndarray) -> np.ndarray:
    """Sector representation of M acting identically on every particle.

    Entry (R, C) is the n x n minor det(M[R, C]) over the occupied modes of
    the two masks, which is how a product map acts on determinant states.
    """
    M = np.asarray(M, dtype=np.complex128)
    if M.shape != (d, d):
        raise ValueError("single-particle matrix must be d x d")
    occ = fock.occupied_modes(d, n)
    D = occ.shape[0]
    minors = M[occ[:, None, :, None], occ[None, :, None, :]]
    return np.linalg.det(minors).reshape(D, D)


def apply_lso(state: DensityState, kraus: list) -> DensityState:
    """Apply a local single-particle operation sum_i (M_i on each particle).

    Each Kraus term acts as the exterior power of its d x d matrix.  The
    output is renormalized when the map is trace-decreasing and the factor
    recorded in metadata; a state annihilated to numerical zero is an error.
    """
    out = np.zeros_like(state.op)
    for M in kraus:
        Phi = exterior_power(state.d, state.n, M)
        out += Phi @ state.op @ Phi.conj().T
    tr = np.trace(out).real
    if tr < 1e-12:
        raise ValueError("channel annihilates the state")
    meta = dict(state.metadata)
    meta.update({"lso_terms": len(kraus), "lso_trace": float(tr)})
    return DensityState(d=state.d, n=state.n, op=out / tr, metadata=meta)
