"""Fixed-particle-number fermionic Fock sectors on occupation bitmasks.

A sector (d, n) is the span of all n-mode occupations of d modes.  Basis
kets are labelled by bitmasks (bit m set = mode m occupied), listed in
ascending numeric order, and the ket for an occupied set {i1 < ... < in}
is defined as f!_{i1} ... f!_{in} |vac> with creation operators applied
left to right.  All sign bookkeeping in this module reduces to one rule:
creating or destroying mode m inside a mask S picks up (-1)**|{i in S : i < m}|.

Matrices returned here are plain dense ndarrays; sectors are capped at
d <= 16 modes which keeps every downstream object comfortably in memory.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
from scipy import sparse

MAX_MODES = 16


def sector_dimension(d: int, n: int) -> int:
    """Number of basis kets of the (d, n) sector, binomial(d, n)."""
    _check_sector(d, n)
    return comb(d, n)


@lru_cache(maxsize=None)
def sector_basis(d: int, n: int) -> np.ndarray:
    """All d-mode bitmasks with n bits set, ascending. Do not mutate."""
    _check_sector(d, n)
    masks = np.array(
        [m for m in range(1 << d) if m.bit_count() == n], dtype=np.int64
    )
    masks.setflags(write=False)
    return masks


@lru_cache(maxsize=None)
def basis_index(d: int, n: int) -> dict[int, int]:
    """Mask -> position in sector_basis(d, n)."""
    return {int(m): i for i, m in enumerate(sector_basis(d, n))}


@lru_cache(maxsize=None)
def occupied_modes(d: int, n: int) -> np.ndarray:
    """(D, n) int array: the sorted occupied modes of each basis mask."""
    masks = sector_basis(d, n)
    out = np.empty((len(masks), n), dtype=np.int64)
    for i, m in enumerate(masks):
        out[i] = [b for b in range(d) if (int(m) >> b) & 1]
    out.setflags(write=False)
    return out


def occupancy_table(d: int, n: int) -> np.ndarray:
    """(D, d) 0/1 array: occupation of each mode in each basis ket."""
    masks = sector_basis(d, n)
    return (masks[:, None] >> np.arange(d)[None, :]) & 1


def vacuum_state(d: int) -> np.ndarray:
    """The single basis vector of the (d, 0) sector."""
    _check_sector(d, 0)
    return np.ones(1, dtype=np.complex128)


def _parity_below(mask: int, m: int) -> int:
    """(-1)**(number of occupied modes below m)."""
    return -1 if (mask & ((1 << m) - 1)).bit_count() & 1 else 1


@lru_cache(maxsize=None)
def creation_matrix(d: int, n: int, m: int) -> np.ndarray:
    """Matrix of f!_m from sector (d, n) to (d, n + 1). Do not mutate.

    Entry conventions follow the ascending-order ket definition, e.g. for
    d = 2 the matrix of f!_1 sends |mask 01> to -|mask 11> because
    |11> := f!_0 f!_1 |vac>.
    """
    _check_sector(d, n + 1)
    if not 0 <= m < d:
        raise ValueError(f"mode {m} outside 0..{d - 1}")
    src = sector_basis(d, n)
    dst_index = basis_index(d, n + 1)
    bit = 1 << m
    out = np.zeros((comb(d, n + 1), comb(d, n)), dtype=np.float64)
    for col, mask in enumerate(src):
        mask = int(mask)
        if mask & bit:
            continue
        out[dst_index[mask | bit], col] = _parity_below(mask, m)
    out.setflags(write=False)
    return out


def annihilation_matrix(d: int, n: int, m: int) -> np.ndarray:
    """Matrix of f_m from sector (d, n) to (d, n - 1), the creation adjoint."""
    return creation_matrix(d, n - 1, m).T


def generalized_creator(d: int, n: int, c: np.ndarray) -> np.ndarray:
    """Matrix of a!(c) = sum_l c_l f!_l from sector (d, n) to (d, n + 1)."""
    c = np.asarray(c, dtype=np.complex128)
    if c.shape != (d,):
        raise ValueError(f"coefficient vector must have shape ({d},)")
    out = np.zeros((comb(d, n + 1), comb(d, n)), dtype=np.complex128)
    for m in range(d):
        if c[m] != 0:
            out += c[m] * creation_matrix(d, n, m)
    return out


def generalized_annihilator(d: int, n: int, c: np.ndarray) -> np.ndarray:
    """Matrix of a(c) = sum_l conj(c_l) f_l from (d, n) to (d, n - 1)."""
    return generalized_creator(d, n - 1, c).conj().T


def contraction_operator(d: int, n: int, cs: np.ndarray) -> np.ndarray:
    """Stacked annihilators a(c^{n-1}) ... a(c^1) mapping (d, n) to (d, 1).

    cs has shape (n - 1, d); row j holds c^{j+1}.  The single-particle
    sector is identified with C^d through its basis kets f!_m |vac>.
    """
    cs = np.asarray(cs, dtype=np.complex128)
    if cs.shape != (n - 1, d):
        raise ValueError(f"expected {n - 1} tuple vectors of length {d}")
    op = np.eye(comb(d, n), dtype=np.complex128)
    for j, c in enumerate(cs):
        op = generalized_annihilator(d, n - j, c) @ op
    return op


def contract_witness(d: int, n: int, W: np.ndarray, cs: np.ndarray) -> np.ndarray:
    """The d x d block a(c^{n-1})...a(c^1) W a!(c^1)...a!(c^{n-1}).

    Linear in W; Hermitian whenever W is.  The block annihilates the span
    of the tuple vectors regardless of W (Pauli exclusion), so at most
    d - n + 1 of its eigenvalues can be nonzero.
    """
    D = comb(d, n)
    W = np.asarray(W, dtype=np.complex128)
    if W.shape != (D, D):
        raise ValueError(f"witness must be {D} x {D} for sector ({d}, {n})")
    K = contraction_operator(d, n, cs)
    return K @ W @ K.conj().T


def slater_state(d: int, coeffs: np.ndarray, tol: float = 1e-10):
    """Sector amplitudes of a!(c_1)...a!(c_n)|vac> from a d x n coefficient matrix.

    Columns are orthonormalized by QR (R diagonal made real positive) before
    the amplitudes are formed, so the returned vector has unit norm and a
    global sign fixed by the left-to-right creation order.  Returns
    (amplitudes, canonical_coeffs).

    Raises ValueError if the columns do not span an n-dimensional space.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim != 2 or coeffs.shape[0] != d:
        raise ValueError(f"coefficient matrix must be {d} x n")
    n = coeffs.shape[1]
    _check_sector(d, n)
    q, r = np.linalg.qr(coeffs)
    diag = np.abs(np.diagonal(r))
    if n and (diag < tol * max(1.0, diag.max(initial=0.0))).any():
        raise ValueError("rank-deficient coefficient matrix")
    phase = np.diagonal(r) / np.where(diag == 0, 1.0, diag)
    q = q * phase.conj()
    return slater_amplitudes(d, q), q


def slater_amplitudes(d: int, coeffs: np.ndarray) -> np.ndarray:
    """Amplitudes <mask| a!(c_1)...a!(c_n) |vac> = det coeffs[mask rows, :].

    No orthonormalization is applied; use slater_state for the canonical
    unit-norm version.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    n = coeffs.shape[1]
    rows = occupied_modes(d, n)
    return np.linalg.det(coeffs[rows, :])


def slater_amplitudes_batch(d: int, coeffs: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Amplitudes for a (B, d, n) stack of coefficient matrices, shape (B, D)."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    B, _, n = coeffs.shape
    rows = occupied_modes(d, n)
    out = np.empty((B, comb(d, n)), dtype=np.complex128)
    for lo in range(0, B, chunk):
        hi = min(lo + chunk, B)
        out[lo:hi] = np.linalg.det(coeffs[lo:hi][:, rows, :])
    return out


def one_body_operator(d: int, n: int, h: np.ndarray) -> np.ndarray:
    """Sector matrix of sum_{p,q} h[p, q] f!_p f_q."""
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (d, d):
        raise ValueError(f"one-body coefficient matrix must be {d} x {d}")
    masks = sector_basis(d, n)
    index = basis_index(d, n)
    out = np.zeros((len(masks), len(masks)), dtype=np.complex128)
    for col, mask in enumerate(masks):
        mask = int(mask)
        for q in range(d):
            if not (mask >> q) & 1:
                continue
            stripped = mask & ~(1 << q)
            sq = _parity_below(mask, q)
            for p in range(d):
                if h[p, q] == 0 or (stripped >> p) & 1:
                    continue
                out[index[stripped | (1 << p)], col] += (
                    h[p, q] * sq * _parity_below(stripped, p)
                )
    return out


def sector_embedding(d: int, n: int) -> sparse.csr_matrix:
    """Isometry V from the (d, n) sector into the n-fold tensor space (C^d)^n.

    Column for mask {i1 < ... < in} is the normalized antisymmetrized
    product (1/sqrt(n!)) sum_pi sgn(pi) |i_pi(1)> x ... x |i_pi(n)>.
    Capped at d**n <= 1e6.
    """
    from itertools import permutations

    _check_sector(d, n)
    if d**n > 1_000_000:
        raise ValueError("tensor space too large (d**n > 1e6)")
    rows_all = occupied_modes(d, n)
    D = comb(d, n)
    perms = list(permutations(range(n)))
    signs = np.array([_perm_sign(p) for p in perms], dtype=np.float64)
    norm = 1.0 / np.sqrt(float(_factorial(n)))
    data, rows, cols = [], [], []
    weights = d ** np.arange(n - 1, -1, -1)
    for col in range(D):
        modes = rows_all[col]
        for p, s in zip(perms, signs):
            rows.append(int(np.dot(modes[list(p)], weights)))
            cols.append(col)
            data.append(s * norm)
    return sparse.csr_matrix((data, (rows, cols)), shape=(d**n, D))


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def _perm_sign(p) -> int:
    seen = [False] * len(p)
    sign = 1
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _check_sector(d: int, n: int) -> None:
    if not 1 <= d <= MAX_MODES:
        raise ValueError(f"mode count d={d} outside 1..{MAX_MODES}")
    if not 0 <= n <= d:
        raise ValueError(f"particle number n={n} outside 0..{d}")
