"""Pairwise fermionic concurrence for two particles in four modes.

The construction mirrors the qubit concurrence: conjugate the state,
apply the particle-hole complement on the six-dimensional pair sector,
and compare the spectrum of rho * dual(rho) against its largest value.
A nonzero result certifies that the state is not a mixture of single
determinants.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np

from . import fock
from .states import DensityState


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@lru_cache(maxsize=1)
def dualisation_matrix() -> np.ndarray:
    """Signed permutation sending the pair {i,j} to its complement {k,l}.

    The sign is the parity of (i, j, k, l) as a permutation of (0, 1, 2, 3),
    so the map squares to the identity and is symmetric.  The antilinear
    dual of a vector v is dualisation_matrix() @ conj(v).
    """
    index = fock.basis_index(4, 2)
    U = np.zeros((6, 6))
    for i, j in combinations(range(4), 2):
        k, l = (m for m in range(4) if m not in (i, j))
        sign = _perm_sign([i, j, k, l])
        src = index[(1 << i) | (1 << j)]
        dst = index[(1 << k) | (1 << l)]
        U[dst, src] = sign
    U.setflags(write=False)
    return U


def _sector_op(rho) -> np.ndarray:
    if isinstance(rho, DensityState):
        if (rho.d, rho.n) != (4, 2):
            raise ValueError("concurrence is defined on the (d=4, n=2) sector only")
        return rho.op
    rho = np.asarray(rho)
    if rho.shape != (6, 6):
        raise ValueError("expected a 6x6 sector operator")
    return rho


def dual_state(rho) -> np.ndarray:
    """Particle-hole complement of the conjugated operator, U conj(rho) U!."""
    op = _sector_op(rho)
    U = dualisation_matrix()
    return U @ op.conj() @ U.T


def pure_concurrence(psi: np.ndarray) -> float:
    """|<dual psi | psi>|, the pure-state value (dualisation is symmetric,
    so this is the modulus of the bilinear psi^T U psi)."""
    psi = np.asarray(psi, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    return float(abs(psi @ (dualisation_matrix() @ psi)))


def concurrence(rho, mode: str = "eigenvalues") -> float:
    """Largest lambda minus the sum of the other five, clamped to [0, 1].

    The lambdas are square roots of the spectrum of rho * dual(rho):
    eigenvalues by default (real nonnegative up to roundoff since the
    product is similar to a PSD matrix), singular values in the secondary
    mode.  The modes coincide on pure states.
    """
    op = _sector_op(rho)
    R = op @ dual_state(op)
    if mode == "eigenvalues":
        ev = np.linalg.eigvals(R)
        if ev.real.min() < -1e-8:
            raise ValueError(f"spectrum of rho*dual(rho) dips to {ev.real.min()}")
        sq = ev.real
        # the square root turns O(eps) spectral noise into O(sqrt(eps)); floor it
        lam = np.sqrt(np.where(sq < 1e-14, 0.0, sq))
    elif mode == "singular":
        # singular values of the product already carry the square-root scaling
        # (for a pure state the one nonzero value is |<dual psi|psi>| itself)
        lam = np.linalg.svd(R, compute_uv=False)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    lam = np.sort(lam)[::-1]
    return float(min(max(lam[0] - lam[1:].sum(), 0.0), 1.0))
