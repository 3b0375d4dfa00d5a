"""Dense semidefinite programming over Hermitian linear matrix inequalities.

Problems are stated in inequality form over a real variable x in R^m:

    minimize    c . x
    subject to  S_j(x) = G_j + A_j(x)  is PSD   for every block j
                (optionally  E x = b, eliminated before the solve)

Two affine block types cover everything downstream: an explicit stack of
Hermitian coefficient matrices (`DenseBlock`), and the structured form
S = sign * K H(x) K! + const (`ContractionBlock`) where H(x) is the
Hermitian matrix holding the whole variable vector in the orthonormal
coordinates of `herm_to_vec`.  The structured form is what entanglement
witness problems produce in bulk, and the interior-point Schur complement
exploits it: with g = K! Wnt^-1 K the block contributes Tr(E_i g E_k g),
assembled for all (i, k) at once from a single Gram product of the
vectorized g stack.

Two backends share the problem objects.  `solve_ipm` is a primal-dual
path-following method with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step, run in native complex Hermitian arithmetic
(the realified image of a Hermitian problem is closed under every kernel
operation, so realified-real and complex iterates coincide; `realify`
is provided for the explicit real embedding and is exercised by the
equivalence tests).  `solve_first_order` is a primal-dual hybrid gradient
iteration for the large sectors the dense method cannot reach; it reports
a feasibility-restored objective together with a dual bound.

Everything is deterministic: no randomness enters either backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse

_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Hermitian coordinates
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _triu(D: int):
    iu = np.triu_indices(D, 1)
    return iu[0].copy(), iu[1].copy()


def herm_dim(D: int) -> int:
    """Real dimension D*D of the Hermitian matrices on C^D."""
    return D * D


def herm_to_vec(H: np.ndarray) -> np.ndarray:
    """Coordinates of Hermitian H in an orthonormal real basis.

    Layout: D diagonal entries, then sqrt(2)*Re of the upper triangle,
    then sqrt(2)*Im of the upper triangle.  <H1, H2> = x1 . x2 exactly.
    """
    H = np.asarray(H)
    D = H.shape[0]
    r, c = _triu(D)
    up = H[r, c]
    return np.concatenate([np.real(np.diagonal(H)), _SQRT2 * up.real, _SQRT2 * up.imag])


def vec_to_herm(x: np.ndarray, D: int) -> np.ndarray:
    """Inverse of herm_to_vec."""
    x = np.asarray(x, dtype=np.float64)
    if x.size != D * D:
        raise ValueError(f"expected {D * D} coordinates, got {x.size}")
    r, c = _triu(D)
    P = D * (D - 1) // 2
    H = np.zeros((D, D), dtype=np.complex128)
    H[np.arange(D), np.arange(D)] = x[:D]
    up = (x[D:D + P] + 1j * x[D + P:]) / _SQRT2
    H[r, c] = up
    H[c, r] = up.conj()
    return H


@lru_cache(maxsize=None)
def _herm_basis_matrix(D: int) -> sparse.csr_matrix:
    """Sparse (D*D, D*D) map from row-major vec(E_i) rows to basis index i."""
    r, c = _triu(D)
    P = D * (D - 1) // 2
    rows, cols, data = [], [], []
    for a in range(D):
        rows.append(a)
        cols.append(a * D + a)
        data.append(1.0 + 0j)
    for k in range(P):
        a, b = int(r[k]), int(c[k])
        rows += [D + k, D + k]
        cols += [a * D + b, b * D + a]
        data += [1 / _SQRT2, 1 / _SQRT2]
    for k in range(P):
        a, b = int(r[k]), int(c[k])
        rows += [D + P + k, D + P + k]
        cols += [a * D + b, b * D + a]
        data += [1j / _SQRT2, -1j / _SQRT2]
    return sparse.csr_matrix((data, (rows, cols)), shape=(D * D, D * D))


# ---------------------------------------------------------------------------
# Blocks and problems
# ---------------------------------------------------------------------------

class DenseBlock:
    """S(x) = F0 + sum_i x_i F_i with an explicit Hermitian coefficient stack."""

    def __init__(self, F0: np.ndarray, F: np.ndarray):
        self.F0 = np.asarray(F0, dtype=np.complex128)
        self.F = np.asarray(F, dtype=np.complex128)
        if self.F0.ndim != 2 or self.F0.shape[0] != self.F0.shape[1]:
            raise ValueError("constant term must be square")
        if self.F.ndim != 3 or self.F.shape[1:] != self.F0.shape:
            raise ValueError("coefficient stack must be (m, D, D)")
        for M in (self.F0, *self.F):
            if np.abs(M - M.conj().T).max() > 1e-12 * max(1.0, np.abs(M).max()):
                raise ValueError("block data must be Hermitian")

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def num_vars(self) -> int:
        return self.F.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(x, self.F, axes=(0, 0))

    def adjoint(self, Z: np.ndarray) -> np.ndarray:
        return np.einsum("ipq,qp->i", self.F, Z).real

    def constant(self) -> np.ndarray:
        return self.F0


class ContractionBlock:
    """S(x) = sign * K H(x) K! + const, H(x) the full Hermitian variable.

    Only valid in problems whose variable is exactly the Hermitian matrix
    of dimension var_dim (m = var_dim**2).
    """

    def __init__(self, K: np.ndarray, sign: float = 1.0, const: np.ndarray | None = None):
        self.K = np.asarray(K, dtype=np.complex128)
        if self.K.ndim != 2:
            raise ValueError("K must be a matrix")
        self.sign = float(sign)
        if const is None:
            self.const = np.zeros((self.K.shape[0],) * 2, dtype=np.complex128)
        else:
            self.const = np.asarray(const, dtype=np.complex128)
            if self.const.shape != (self.K.shape[0],) * 2:
                raise ValueError("const shape mismatch")

    @property
    def dim(self) -> int:
        return self.K.shape[0]

    @property
    def var_dim(self) -> int:
        return self.K.shape[1]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        H = vec_to_herm(x, self.var_dim)
        return self.const + self.sign * (self.K @ H @ self.K.conj().T)

    def adjoint(self, Z: np.ndarray) -> np.ndarray:
        return self.sign * herm_to_vec(self.K.conj().T @ Z @ self.K)

    def constant(self) -> np.ndarray:
        return self.const


def split_offsets(var_dims) -> list:
    """Start offsets of each Hermitian sector inside a concatenated variable."""
    offs, pos = [], 0
    for v in var_dims:
        offs.append(pos)
        pos += v * v
    return offs


def split_to_vec(Hs) -> np.ndarray:
    """Concatenated herm_to_vec coordinates of a list of Hermitian sectors."""
    return np.concatenate([herm_to_vec(H) for H in Hs])


def vec_to_split(x: np.ndarray, var_dims) -> list:
    """Inverse of split_to_vec."""
    out, pos = [], 0
    for v in var_dims:
        out.append(vec_to_herm(x[pos:pos + v * v], v))
        pos += v * v
    return out


class SplitContractionBlock:
    """S(x) = sign * sum_b K_b H_b(x) K_b! + const over a sector-split variable.

    The variable is a direct sum of independent Hermitian sectors with
    dimensions var_dims, laid out as concatenated herm_to_vec coordinates
    (m = sum of squares).  A None kernel skips its sector.  Used when a
    symmetry makes the optimizer block-diagonal, which shrinks the variable
    without giving up the contraction structure.  Only the first-order
    backend accepts these blocks.
    """

    def __init__(self, Ks, var_dims, sign: float = 1.0,
                 const: np.ndarray | None = None):
        self.var_dims = tuple(int(v) for v in var_dims)
        if len(Ks) != len(self.var_dims):
            raise ValueError("one kernel (or None) is required per sector")
        dim = None
        self.Ks: list = []
        for b, K in enumerate(Ks):
            if K is None:
                self.Ks.append(None)
                continue
            K = np.asarray(K, dtype=np.complex128)
            if K.ndim != 2 or K.shape[1] != self.var_dims[b]:
                raise ValueError(f"sector {b} kernel must be (dim, {self.var_dims[b]})")
            if dim is None:
                dim = K.shape[0]
            elif K.shape[0] != dim:
                raise ValueError("sector kernels must share the output dimension")
            self.Ks.append(K)
        if dim is None:
            raise ValueError("at least one sector kernel is required")
        self._dim = dim
        self.sign = float(sign)
        self.offsets = split_offsets(self.var_dims)
        if const is None:
            self.const = np.zeros((dim, dim), dtype=np.complex128)
        else:
            self.const = np.asarray(const, dtype=np.complex128)
            if self.const.shape != (dim, dim):
                raise ValueError("const shape mismatch")

    @property
    def dim(self) -> int:
        return self._dim

    def num_vars(self) -> int:
        return sum(v * v for v in self.var_dims)

    def signature(self) -> tuple:
        return (self._dim, self.var_dims,
                tuple(K is not None for K in self.Ks))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for K, v, off in zip(self.Ks, self.var_dims, self.offsets):
            if K is None:
                continue
            H = vec_to_herm(x[off:off + v * v], v)
            out += self.sign * (K @ H @ K.conj().T)
        return out

    def adjoint(self, Z: np.ndarray) -> np.ndarray:
        y = np.zeros(self.num_vars())
        for K, v, off in zip(self.Ks, self.var_dims, self.offsets):
            if K is None:
                continue
            y[off:off + v * v] = self.sign * herm_to_vec(K.conj().T @ Z @ K)
        return y

    def constant(self) -> np.ndarray:
        return self.const


class DiagBlock:
    """Elementwise constraints A x + b >= 0, treated as a stack of 1x1 blocks.

    Useful for simplex weights and other orthant constraints; the batched
    solver kernels apply unchanged with block dimension 1.
    """

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = np.asarray(A, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ValueError("need A of shape (k, m) and b of shape (k,)")

    @property
    def dim(self) -> int:
        return 1

    @property
    def count(self) -> int:
        return self.A.shape[0]

    def num_vars(self) -> int:
        return self.A.shape[1]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.b

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        return self.A.T @ np.asarray(z).real

    def constant(self) -> np.ndarray:
        return self.b


@dataclass
class SdpProblem:
    """Inequality-form SDP; see module docstring.

    objective_offset is added to c . x on report; objective_scale multiplies
    the reported value (used e.g. to divide out the factor a real embedding
    doubles in).
    """

    num_vars: int
    c: np.ndarray
    blocks: list
    eq_A: np.ndarray | None = None
    eq_b: np.ndarray | None = None
    objective_offset: float = 0.0
    objective_scale: float = 1.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.c.shape != (self.num_vars,):
            raise ValueError("objective vector length mismatch")
        if not self.blocks:
            raise ValueError("at least one PSD block is required")
        for blk in self.blocks:
            if isinstance(blk, (DenseBlock, DiagBlock, SplitContractionBlock)):
                if blk.num_vars() != self.num_vars:
                    raise ValueError("block coefficient count mismatch")
            elif isinstance(blk, ContractionBlock):
                if blk.var_dim**2 != self.num_vars:
                    raise ValueError(
                        "contraction blocks require m = var_dim**2 variables"
                    )
            else:
                raise TypeError(f"unknown block type {type(blk)!r}")
        if (self.eq_A is None) != (self.eq_b is None):
            raise ValueError("equality data must supply both E and b")
        if self.eq_A is not None:
            self.eq_A = np.asarray(self.eq_A, dtype=np.float64)
            self.eq_b = np.asarray(self.eq_b, dtype=np.float64)
            if self.eq_A.shape != (self.eq_b.size, self.num_vars):
                raise ValueError("equality shape mismatch")

    def report_objective(self, raw: float) -> float:
        return self.objective_scale * (raw + self.objective_offset)


@dataclass
class SdpConfig:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    max_iter: int = 100
    jitter: float = 1e-12
    accuracy: float = 1e-2          # first-order objective accuracy
    fo_max_iter: int = 40000
    fo_check_every: int = 100
    seed: int = 0                   # recorded for provenance; both backends are deterministic
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    dual_blocks: list = field(default_factory=list)
    primal_blocks: list = field(default_factory=list)
    iterate_log: list = field(default_factory=list)
    dual_bound: float | None = None   # first-order backend only
    backend: str = "ipm"


# ---------------------------------------------------------------------------
# realify
# ---------------------------------------------------------------------------

def realify(H: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[X, -Y], [Y, X]] of Hermitian H = X + iY.

    Eigenvalues appear with doubled multiplicity; inner products
    Tr(realify(A) realify(B)) pick up a factor 2 relative to Re Tr(A!B),
    which callers must track (objective values double in the embedded
    matrix form).
    """
    H = np.asarray(H, dtype=np.complex128)
    X, Y = H.real, H.imag
    return np.block([[X, -Y], [Y, X]])


def realify_problem(problem: SdpProblem) -> SdpProblem:
    """Embed every block of a Hermitian problem as real symmetric.

    The variable vector is unchanged (the coordinates already are real), so
    reported objectives are identical; matrix-valued data doubles its inner
    products, which only shows up in the doubled spectra of the blocks.
    """
    blocks = []
    for blk in problem.blocks:
        if isinstance(blk, DenseBlock):
            blocks.append(
                DenseBlock(realify(blk.F0), np.array([realify(F) for F in blk.F]))
            )
        else:
            raise TypeError("realify_problem supports explicit dense blocks only")
    return SdpProblem(
        num_vars=problem.num_vars,
        c=problem.c.copy(),
        blocks=blocks,
        eq_A=None if problem.eq_A is None else problem.eq_A.copy(),
        eq_b=None if problem.eq_b is None else problem.eq_b.copy(),
        objective_offset=problem.objective_offset,
        objective_scale=problem.objective_scale,
    )


# ---------------------------------------------------------------------------
# equality elimination
# ---------------------------------------------------------------------------

def _eliminate_equalities(problem: SdpProblem):
    """Parametrize {x : E x = b} as x0 + N z and rewrite the blocks over z."""
    E, b = problem.eq_A, problem.eq_b
    x0, res, rank, _ = np.linalg.lstsq(E, b, rcond=None)
    if np.linalg.norm(E @ x0 - b) > 1e-9 * max(1.0, np.linalg.norm(b)):
        return None, None, None  # inconsistent equalities
    from scipy.linalg import null_space

    N = null_space(E)
    blocks = []
    for blk in problem.blocks:
        if isinstance(blk, ContractionBlock):
            raise TypeError("equality elimination supports dense and diagonal blocks only")
        if isinstance(blk, DiagBlock):
            blocks.append(DiagBlock(blk.A @ N, blk.A @ x0 + blk.b))
            continue
        F0 = blk.evaluate(x0)
        F = np.tensordot(N, blk.F, axes=(0, 0))  # (z, D, D)
        blocks.append(DenseBlock(F0, F))
    reduced = SdpProblem(
        num_vars=N.shape[1],
        c=N.T @ problem.c,
        blocks=blocks,
        objective_offset=problem.objective_offset + float(problem.c @ x0),
        objective_scale=problem.objective_scale,
    )
    return reduced, x0, N


# ---------------------------------------------------------------------------
# interior-point backend
# ---------------------------------------------------------------------------

class _Group:
    """A batch of same-shape contraction blocks sharing vectorized kernels."""

    def __init__(self, blocks, indices):
        self.indices = indices
        self.K = np.array([b.K for b in blocks])
        self.sign = np.array([b.sign for b in blocks])[:, None, None]
        self.const = np.array([b.const for b in blocks])
        self.J, self.dim, self.var_dim = self.K.shape
        # row-stacked kernels let the J-fold maps run as two large GEMMs
        self.T = self.K.reshape(self.J * self.dim, self.var_dim)

    def evaluate(self, x):
        return self.const + self.evaluate_linear(x)

    def evaluate_linear(self, x):
        H = vec_to_herm(x, self.var_dim)
        KH = (self.T @ H).reshape(self.J, self.dim, self.var_dim)
        out = KH @ self.K.conj().swapaxes(-1, -2)
        return self.sign * out

    def adjoint_sum(self, Z):
        """sum_j A_j*(Z_j) for a (J, dim, dim) stack."""
        rows = ((self.sign * Z) @ self.K).reshape(self.J * self.dim, self.var_dim)
        Y = self.T.conj().T @ rows
        return herm_to_vec(0.5 * (Y + Y.conj().T))

    def const_stack(self):
        return self.const

    def schur(self, w_inv):
        """sum_j Tr(E_i g_j E_k g_j), g_j = K_j! w_inv_j K_j, as an (m, m) matrix."""
        D = self.var_dim
        g = self.K.conj().swapaxes(-1, -2) @ (w_inv @ self.K)
        U = g.reshape(self.J, D * D)
        Q = U.T @ U                      # indexed [(b,c), (d,a)]
        P = Q.reshape(D, D, D, D).transpose(3, 0, 1, 2).reshape(D * D, D * D)
        B = _herm_basis_matrix(D)
        M = B @ (B @ P.T).T              # E P E^T over combined indices
        return np.ascontiguousarray(np.asarray(M).real)


class _DenseGroup:
    """Dense blocks handled one by one (there are never many of them)."""

    def __init__(self, blocks, indices):
        self.indices = indices
        self.blocks = blocks
        self.J = len(blocks)
        self.dim = blocks[0].dim

    def evaluate(self, x):
        return np.array([b.evaluate(x) for b in self.blocks])

    def evaluate_linear(self, x):
        return np.array([np.tensordot(x, b.F, axes=(0, 0)) for b in self.blocks])

    def adjoint_sum(self, Z):
        out = 0.0
        for b, z in zip(self.blocks, Z):
            out = out + b.adjoint(z)
        return out

    def const_stack(self):
        return np.array([b.F0 for b in self.blocks])

    def schur(self, w_inv):
        m = self.blocks[0].num_vars()
        M = np.zeros((m, m))
        for b, wi in zip(self.blocks, w_inv):
            # F_hat_i = R^-1 F_i R^-!; via w_inv this is Tr(F_i w_inv F_k w_inv)
            T = np.einsum("ab,ibc,cd->iad", wi, b.F, wi, optimize=True)
            M += np.real(
                T.reshape(len(b.F), -1) @ b.F.reshape(len(b.F), -1).conj().T
            ).T
        return M


class _SplitGroup:
    """A batch of same-signature split-variable contraction blocks.

    Kernels are stacked per sector so the J-fold maps run as one GEMM pair
    per active sector; no Schur assembly (first-order backend only).
    """

    def __init__(self, blocks, indices):
        self.indices = indices
        self.J = len(blocks)
        self.dim = blocks[0].dim
        self.var_dims = blocks[0].var_dims
        self.offsets = blocks[0].offsets
        self.sign = np.array([b.sign for b in blocks])[:, None, None]
        self.const = np.array([b.const for b in blocks])
        self._m = blocks[0].num_vars()
        self.K = []        # per sector: (J, dim, v) stack or None
        self.T = []        # per sector: (J*dim, v) row-stacked kernels
        for b in range(len(self.var_dims)):
            if blocks[0].Ks[b] is None:
                self.K.append(None)
                self.T.append(None)
                continue
            Kb = np.array([blk.Ks[b] for blk in blocks])
            self.K.append(Kb)
            self.T.append(Kb.reshape(self.J * self.dim, self.var_dims[b]))

    def evaluate(self, x):
        return self.const + self.evaluate_linear(x)

    def evaluate_linear(self, x):
        out = np.zeros((self.J, self.dim, self.dim), dtype=np.complex128)
        for Kb, Tb, v, off in zip(self.K, self.T, self.var_dims, self.offsets):
            if Kb is None:
                continue
            H = vec_to_herm(x[off:off + v * v], v)
            KH = (Tb @ H).reshape(self.J, self.dim, v)
            out += KH @ Kb.conj().swapaxes(-1, -2)
        return self.sign * out

    def adjoint_sum(self, Z):
        y = np.zeros(self._m)
        sZ = self.sign * Z
        for Kb, Tb, v, off in zip(self.K, self.T, self.var_dims, self.offsets):
            if Kb is None:
                continue
            rows = (sZ @ Kb).reshape(self.J * self.dim, v)
            Y = Tb.conj().T @ rows
            y[off:off + v * v] = herm_to_vec(0.5 * (Y + Y.conj().T))
        return y

    def const_stack(self):
        return self.const


class _DiagGroup:
    """One DiagBlock as a batch of 1x1 blocks; all maps stay vectorized."""

    def __init__(self, block, index):
        self.indices = [index]
        self.block = block
        self.J = block.count
        self.dim = 1

    def evaluate(self, x):
        return (self.block.A @ x + self.block.b).reshape(self.J, 1, 1).astype(
            np.complex128)

    def evaluate_linear(self, x):
        return (self.block.A @ x).reshape(self.J, 1, 1).astype(np.complex128)

    def adjoint_sum(self, Z):
        return self.block.A.T @ np.asarray(Z).reshape(self.J).real

    def const_stack(self):
        return self.block.b.reshape(self.J, 1, 1).astype(np.complex128)

    def schur(self, w_inv):
        d = np.asarray(w_inv).reshape(self.J).real
        return (self.block.A.T * (d * d)) @ self.block.A


def _group_blocks(blocks):
    groups = []
    cont: dict[tuple, list] = {}
    split: dict[tuple, list] = {}
    dense: dict[int, list] = {}
    for idx, blk in enumerate(blocks):
        if isinstance(blk, ContractionBlock):
            cont.setdefault(blk.K.shape, []).append((idx, blk))
        elif isinstance(blk, SplitContractionBlock):
            split.setdefault(blk.signature(), []).append((idx, blk))
        elif isinstance(blk, DiagBlock):
            groups.append(_DiagGroup(blk, idx))
        else:
            dense.setdefault(blk.dim, []).append((idx, blk))
    for shape, pairs in cont.items():
        groups.append(_Group([b for _, b in pairs], [i for i, _ in pairs]))
    for sig, pairs in split.items():
        groups.append(_SplitGroup([b for _, b in pairs], [i for i, _ in pairs]))
    for dim, pairs in dense.items():
        groups.append(_DenseGroup([b for _, b in pairs], [i for i, _ in pairs]))
    return groups


def _batched_chol(S, jitter=0.0):
    if jitter:
        S = S + jitter * np.eye(S.shape[-1])
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        # iterates are positive definite up to roundoff; on degenerate problems
        # the boundary steps can push the smallest eigenvalue a hair below
        # zero, so floor the spectrum at a scale-relative epsilon and retry
        lam, Q = np.linalg.eigh(S)
        floor = 1e-13 * max(1.0, float(lam.max()))
        lam = np.maximum(lam, floor)
        repaired = (Q * lam[..., None, :]) @ Q.conj().swapaxes(-1, -2)
        return np.linalg.cholesky(_hermitize(repaired))


def _congr(Linv, M):
    """L^-1 M L^-! batched, from precomputed inverse factors."""
    return Linv @ M @ Linv.conj().swapaxes(-1, -2)


def _min_eig_step(L, dM):
    """Largest alpha with M + alpha dM PSD given chol(M) = L, batched."""
    Linv = np.linalg.inv(L)
    T = _congr(Linv, dM)
    T = 0.5 * (T + T.conj().swapaxes(-1, -2))
    lam = np.linalg.eigvalsh(T)[..., 0]
    lam = float(lam.min())
    if lam >= 0:
        return np.inf
    return -1.0 / lam


def solve_ipm(problem: SdpProblem, cfg: SdpConfig | None = None) -> SdpSolution:
    """Primal-dual path-following interior-point solve.

    On status "optimal" the complementarity gap is below cfg.gap_tol and the
    scaled primal/dual residuals are below cfg.feas_tol.  The reported dual
    objective is primal_objective - gap, which coincides with the Lagrangian
    dual value at convergence; the PSD multipliers are in dual_blocks.
    Deterministic: identical inputs give identical iterates.
    """
    cfg = cfg or SdpConfig()
    if problem.eq_A is not None:
        reduced, x0, N = _eliminate_equalities(problem)
        if reduced is None:
            return SdpSolution(
                status="infeasible-detected", x=np.zeros(problem.num_vars),
                primal_objective=np.nan, dual_objective=np.nan, gap=np.nan,
                primal_residual=np.inf, dual_residual=np.inf, iterations=0,
            )
        sol = solve_ipm(reduced, cfg)
        sol.x = x0 + N @ sol.x
        return sol

    m = problem.num_vars
    if m > 12000:
        raise ValueError("problem too large for the dense interior-point backend")
    c = problem.c
    groups = _group_blocks(problem.blocks)
    total_dim = sum(g.J * g.dim for g in groups)

    # infeasible start: identity-scaled S and Z, x = 0
    x = np.zeros(m)
    S, Z = [], []
    for g in groups:
        g_norm = max(1.0, float(np.abs(g.evaluate(x)).max()))
        S.append(np.broadcast_to(np.eye(g.dim) * g_norm, (g.J, g.dim, g.dim)).copy()
                 .astype(np.complex128))
        Z.append(np.broadcast_to(np.eye(g.dim) * max(1.0, float(np.abs(c).max())),
                                 (g.J, g.dim, g.dim)).copy().astype(np.complex128))

    log = []
    status = "max-iterations"
    tiny_steps = 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        S_aff = [g.evaluate(x) for g in groups]
        rp = [sa - s for sa, s in zip(S_aff, S)]
        rd = c - sum(g.adjoint_sum(z) for g, z in zip(groups, Z))
        gap = float(sum(np.einsum("jab,jba->", s, z).real for s, z in zip(S, Z)))
        if not np.isfinite(gap) or gap > 1e30:
            status = "numerical-failure"
            break
        # approximate Farkas certificate: a large dual with A*(Z) ~ 0 and
        # sum_j <G_j, Z_j> < 0 rules out any feasible point
        znorm = np.sqrt(sum(float(np.linalg.norm(z) ** 2) for z in Z))
        if znorm > 1e4:
            lin = float(np.linalg.norm(c - rd)) / znorm
            gdot = sum(
                float(np.einsum("jab,jba->", g.const_stack(), z).real)
                for g, z in zip(groups, Z)
            ) / znorm
            if lin <= 1e-7 and gdot <= -1e-7:
                status = "infeasible-detected"
                break
        mu = gap / total_dim
        pobj = float(c @ x)
        dobj = pobj - gap
        rp_norm = max(
            float(np.abs(r).max()) / (1.0 + float(np.abs(g.const).max() if hasattr(g, "const") else 1.0))
            for g, r in zip(groups, rp)
        )
        rd_norm = float(np.linalg.norm(rd)) / (1.0 + float(np.linalg.norm(c)))
        log.append((pobj, dobj, gap, rp_norm, rd_norm))
        if cfg.verbose:
            print(f"  it {it:3d}  pobj {pobj:+.8e}  gap {gap:.3e}  rp {rp_norm:.2e} rd {rd_norm:.2e}")
        if gap <= cfg.gap_tol and rp_norm <= cfg.feas_tol and rd_norm <= cfg.feas_tol:
            status = "optimal"
            break

        # NT scaling per group
        Ls = [_batched_chol(s) for s in S]
        scal = []
        for L, z in zip(Ls, Z):
            A = L.conj().swapaxes(-1, -2) @ z @ L
            A = 0.5 * (A + A.conj().swapaxes(-1, -2))
            lam, Q = np.linalg.eigh(A)
            lam = np.maximum(lam, 1e-300)
            R = L @ (Q * (lam[..., None, :] ** -0.25))
            Linv = np.linalg.inv(L)
            Rinv = (Q.conj().swapaxes(-1, -2) * (lam[..., :, None] ** 0.25)) @ Linv
            w_inv = Rinv.conj().swapaxes(-1, -2) @ Rinv
            scal.append((R, Rinv, w_inv, lam))

        M = np.zeros((m, m))
        for g, (_, _, w_inv, _) in zip(groups, scal):
            M += g.schur(w_inv)
        # factor the Schur complement unregularized if possible; jitter only
        # on failure (a constant floor would bias dx and stall the duals once
        # trace(M) blows up near the boundary)
        base_jitter = cfg.jitter * max(1.0, np.trace(M) / m)
        L_M = None
        jit = 0.0
        for _ in range(8):
            try:
                L_M = np.linalg.cholesky(M if jit == 0.0 else M + jit * np.eye(m))
                break
            except np.linalg.LinAlgError:
                jit = base_jitter if jit == 0.0 else jit * 100.0
        if L_M is None:
            status = "numerical-failure"
            break

        def newton(V_list):
            rhs = -rd.copy()
            for g, (R, Rinv, w_inv, _), V, r in zip(groups, scal, V_list, rp):
                T = Rinv.conj().swapaxes(-1, -2) @ V @ Rinv - _congr_w(w_inv, r)
                rhs += g.adjoint_sum(T)
            dx = _chol_solve(L_M, rhs)
            dS, dZ = [], []
            for g, (R, Rinv, w_inv, _), V, r in zip(groups, scal, V_list, rp):
                dS_g = g.evaluate_linear(dx) + r
                dZ_g = Rinv.conj().swapaxes(-1, -2) @ V @ Rinv - _congr_w(w_inv, dS_g)
                dS.append(_hermitize(dS_g))
                dZ.append(_hermitize(dZ_g))
            return dx, dS, dZ

        # predictor
        V_aff = []
        for (R, Rinv, w_inv, lam) in scal:
            root = np.sqrt(lam)
            V = np.zeros_like(R)
            idx = np.arange(R.shape[-1])
            V[..., idx, idx] = -root
            V_aff.append(V)
        dx_a, dS_a, dZ_a = newton(V_aff)
        a_p = min(1.0, *(0.99 * _min_eig_step(L, d) for L, d in zip(Ls, dS_a)))
        Lz = [_batched_chol(z) for z in Z]
        a_d = min(1.0, *(0.99 * _min_eig_step(L, d) for L, d in zip(Lz, dZ_a)))
        gap_aff = float(sum(
            np.einsum("jab,jba->", s + a_p * ds, z + a_d * dz).real
            for s, z, ds, dz in zip(S, Z, dS_a, dZ_a)
        ))
        sigma = min(1.0, max((max(gap_aff, 0.0) / gap) ** 3, 1e-10))

        # corrector
        V_cor = []
        for (R, Rinv, w_inv, lam), dS_g, dZ_g, V0 in zip(scal, dS_a, dZ_a, V_aff):
            root = np.sqrt(lam)
            dSh = Rinv @ dS_g @ Rinv.conj().swapaxes(-1, -2)
            dZh = R.conj().swapaxes(-1, -2) @ dZ_g @ R
            cross = 0.5 * (dSh @ dZh + dZh @ dSh)
            target = -cross
            idx = np.arange(R.shape[-1])
            target[..., idx, idx] += sigma * mu - lam
            denom = 0.5 * (root[..., None, :] + root[..., :, None])
            V_cor.append(target / denom)
        dx, dS, dZ = newton(V_cor)
        a_p = min(1.0, *(0.99 * _min_eig_step(L, d) for L, d in zip(Ls, dS)))
        a_d = min(1.0, *(0.99 * _min_eig_step(L, d) for L, d in zip(Lz, dZ)))

        x = x + a_p * dx
        S = [_hermitize(s + a_p * d) for s, d in zip(S, dS)]
        Z = [_hermitize(z + a_d * d) for z, d in zip(Z, dZ)]

        if max(a_p, a_d) < 1e-8:
            tiny_steps += 1
            if tiny_steps >= 3:
                status = (
                    "infeasible-detected"
                    if rp_norm > 1e3 * cfg.feas_tol and gap / total_dim < 1e-6
                    else "numerical-failure"
                )
                break
        else:
            tiny_steps = 0

    pobj = float(c @ x)
    gap = float(sum(np.einsum("jab,jba->", s, z).real for s, z in zip(S, Z)))
    dobj = pobj - gap
    S_aff = [g.evaluate(x) for g in groups]
    rp_norm = max(float(np.abs(sa - s).max()) for sa, s in zip(S_aff, S))
    rd_norm = float(np.linalg.norm(c - sum(g.adjoint_sum(z) for g, z in zip(groups, Z))))

    dual_blocks = [None] * len(problem.blocks)
    primal_blocks = [None] * len(problem.blocks)
    for g, z, s in zip(groups, Z, S):
        if isinstance(g, _DiagGroup):
            dual_blocks[g.indices[0]] = z.reshape(g.J).real
            primal_blocks[g.indices[0]] = s.reshape(g.J).real
            continue
        for pos, idx in enumerate(g.indices):
            dual_blocks[idx] = z[pos]
            primal_blocks[idx] = s[pos]

    return SdpSolution(
        status=status,
        x=x,
        primal_objective=problem.report_objective(pobj),
        dual_objective=problem.report_objective(pobj) - problem.objective_scale * gap,
        gap=problem.objective_scale * gap,
        primal_residual=rp_norm,
        dual_residual=rd_norm,
        iterations=it,
        dual_blocks=dual_blocks,
        primal_blocks=primal_blocks,
        iterate_log=log,
        backend="ipm",
    )


def _congr_w(w_inv, M):
    return w_inv @ M @ w_inv


def _hermitize(M):
    return 0.5 * (M + M.conj().swapaxes(-1, -2))


def _chol_solve(L, rhs):
    from scipy.linalg import solve_triangular

    y = solve_triangular(L, rhs, lower=True)
    return solve_triangular(L, y, lower=True, trans="T")


# ---------------------------------------------------------------------------
# first-order backend
# ---------------------------------------------------------------------------

def _operator_norm(groups, m, iters=60):
    v = np.ones(m) / np.sqrt(m)
    est = 1.0
    for _ in range(iters):
        Sv = [g.evaluate_linear(v) for g in groups]
        w = sum(g.adjoint_sum(s) for g, s in zip(groups, Sv))
        est = np.linalg.norm(w)
        if est == 0:
            return 1.0
        v = w / est
    return np.sqrt(est)


def solve_first_order(
    problem: SdpProblem,
    cfg: SdpConfig | None = None,
    warm: tuple | None = None,
    strictly_feasible_x: np.ndarray | None = None,
    norm_bound: float | None = None,
) -> SdpSolution:
    """Primal-dual hybrid gradient iteration for large LMI problems.

    The split between primal and dual step sizes is rebalanced at every
    check from the norms of the current iterates, which roughly minimizes
    the O(1/k) constant; acceptance stays certificate-based either way.
    Stops once the feasibility-restored objective and the dual bound agree
    to cfg.accuracy (absolute).  The restored point mixes the iterate with
    strictly_feasible_x (required when the iterate violates a block; the
    witness problems pass H = I/2).  The dual bound is
    -sum_j <X_j, G_j> - ||c - sum_j A_j*(X_j)|| * rho with rho a norm bound
    on the optimizer (norm_bound, default scaled from the restored iterate),
    so it is rigorous on the ball ||x|| <= rho.  Deterministic given inputs.
    """
    cfg = cfg or SdpConfig()
    if problem.eq_A is not None:
        reduced, x0, N = _eliminate_equalities(problem)
        if reduced is None:
            return SdpSolution(
                status="infeasible-detected", x=np.zeros(problem.num_vars),
                primal_objective=np.nan, dual_objective=np.nan, gap=np.nan,
                primal_residual=np.inf, dual_residual=np.inf, iterations=0,
            )
        sol = solve_first_order(reduced, cfg)
        sol.x = x0 + N @ sol.x
        return sol

    m = problem.num_vars
    c = problem.c
    groups = _group_blocks(problem.blocks)
    Gs = [g.const_stack() for g in groups]

    Anorm = _operator_norm(groups, m)
    omega = 1.0
    tau = 0.95 / Anorm
    sig = 0.95 / Anorm

    if warm is not None:
        x = warm[0].copy()
        P = [p.copy() for p in warm[1]]
        for g, p in zip(groups, P):
            if p.shape[0] != g.J:
                raise ValueError("warm start block count mismatch")
    else:
        x = np.zeros(m)
        P = [np.zeros((g.J, g.dim, g.dim), dtype=np.complex128) for g in groups]

    margins = None
    if strictly_feasible_x is not None:
        margins = [
            np.linalg.eigvalsh(g.evaluate(strictly_feasible_x)).min(axis=-1)
            for g in groups
        ]

    def restore(xc):
        """Exactly feasible point and its objective, by mixing toward the interior."""
        viol = [np.maximum(-np.linalg.eigvalsh(g.evaluate(xc)).min(axis=-1), 0.0)
                for g in groups]
        worst = max(float(v.max()) for v in viol)
        if worst <= 0.0:
            return xc, float(c @ xc), 0.0
        if margins is None:
            return None, np.inf, worst
        theta = 0.0
        for v, mg in zip(viol, margins):
            active = v > 0
            if active.any():
                t = (v[active] / (v[active] + np.maximum(mg[active], 1e-14))).max()
                theta = max(theta, float(t))
        theta = min(1.0, theta * 1.0000001)
        xf = (1 - theta) * xc + theta * strictly_feasible_x
        return xf, float(c @ xf), worst

    relax = 1.85
    best = None
    status = "max-iterations"
    it = 0
    log = []
    for it in range(1, cfg.fo_max_iter + 1):
        # primal step, then dual ascent at the extrapolated point (Condat's
        # ordering), then relaxation of both
        grad = c + sum(g.adjoint_sum(p) for g, p in zip(groups, P))
        x_t = x - tau * grad
        x_bar = 2.0 * x_t - x
        P_t = []
        for gi, g in enumerate(groups):
            V = _hermitize(P[gi] + sig * (g.evaluate_linear(x_bar) + Gs[gi]))
            lam, Q = np.linalg.eigh(V)
            lam = np.minimum(lam, 0.0)
            P_t.append((Q * lam[..., None, :]) @ Q.conj().swapaxes(-1, -2))
        x = x + relax * (x_t - x)
        P = [p + relax * (pt - p) for p, pt in zip(P, P_t)]

        if it % cfg.fo_check_every == 0 or it == cfg.fo_max_iter:
            xf, pf, worst = restore(x)
            X = [-p for p in P]
            r = c - sum(g.adjoint_sum(xx) for g, xx in zip(groups, X))
            lin = sum(float(np.einsum("jab,jba->", xx, gg).real)
                      for xx, gg in zip(X, Gs))
            rho = norm_bound if norm_bound is not None else 2.0 * max(
                np.linalg.norm(xf if xf is not None else x), 1.0
            )
            dual_bound = -lin - np.linalg.norm(r) * rho
            gap_est = pf - dual_bound
            log.append((pf, dual_bound, gap_est, worst, float(np.linalg.norm(r))))
            if best is None or pf - dual_bound < best[2]:
                best = (xf if xf is not None else x, pf, gap_est, dual_bound, X, worst)
            if xf is not None and gap_est <= cfg.accuracy:
                status = "optimal"
                break
            # rebalance the primal/dual step split toward the scale ratio
            # of the iterates (tau * sig * |A|^2 < 1 is preserved); the
            # target settles as the iterates converge, so the adjustment
            # dies out on its own
            xn = max(float(np.linalg.norm(x)), 1e-8)
            Pn = max(sum(float(np.linalg.norm(p)) ** 2 for p in P) ** 0.5, 1e-8)
            omega = float(np.clip(omega ** 0.7 * (xn / Pn) ** 0.15, 0.05, 200.0))
            tau = 0.95 * omega / Anorm
            sig = 0.95 / (omega * Anorm)

    if best is None:
        xf, pf, worst = restore(x)
        X = [-p for p in P]
        best = (xf if xf is not None else x, pf, np.inf, -np.inf, X, worst)
    xb, pobj, gap_est, dual_bound, X, worst = best

    dual_blocks = [None] * len(problem.blocks)
    for g, xx in zip(groups, X):
        if isinstance(g, _DiagGroup):
            dual_blocks[g.indices[0]] = xx.reshape(g.J).real
            continue
        for pos, idx in enumerate(g.indices):
            dual_blocks[idx] = xx[pos]

    return SdpSolution(
        status=status,
        x=xb,
        primal_objective=problem.report_objective(pobj),
        dual_objective=problem.report_objective(pobj) - problem.objective_scale * gap_est,
        gap=problem.objective_scale * gap_est,
        primal_residual=worst,
        dual_residual=float(np.linalg.norm(
            c - sum(g.adjoint_sum(xx) for g, xx in zip(groups, X)))),
        iterations=it,
        dual_blocks=dual_blocks,
        iterate_log=log,
        dual_bound=problem.objective_scale * (dual_bound + problem.objective_offset),
        backend="fo",
    )


def solve_auto(problem: SdpProblem, cfg: SdpConfig | None = None, backend: str = "auto",
               **fo_kwargs) -> SdpSolution:
    """Dispatch by size: interior-point for small dense problems, else first-order.

    The dense backend is cubic in both the realified block size and the
    variable count (Schur factorization), so it is picked only when the
    largest realified block stays within 160 and the variable vector within
    1024 coordinates; split-variable blocks always go first-order.
    """
    if backend == "ipm":
        return solve_ipm(problem, cfg)
    if backend == "fo":
        return solve_first_order(problem, cfg, **fo_kwargs)
    if backend != "auto":
        raise ValueError(f"unknown backend {backend!r}")
    largest = 2 * max(blk.dim for blk in problem.blocks)
    has_split = any(isinstance(b, SplitContractionBlock) for b in problem.blocks)
    if largest <= 160 and problem.num_vars <= 1024 and not has_split:
        return solve_ipm(problem, cfg)
    return solve_first_order(problem, cfg, **fo_kwargs)


# ---------------------------------------------------------------------------
# debug dump
# ---------------------------------------------------------------------------

def dump_problem(problem: SdpProblem, path: str) -> None:
    """Plain-text dump: header line, objective, then per-block dimensions and
    row-major entries (real imag pairs), one matrix per line."""
    with open(path, "w") as fh:
        fh.write(f"sdp m={problem.num_vars} blocks={len(problem.blocks)}\n")
        fh.write(" ".join(repr(float(v)) for v in problem.c) + "\n")
        for blk in problem.blocks:
            if isinstance(blk, ContractionBlock):
                stack = [blk.const] + [
                    blk.sign * (blk.K @ vec_to_herm(e, blk.var_dim) @ blk.K.conj().T)
                    for e in np.eye(problem.num_vars)
                ]
            else:
                stack = [blk.F0] + list(blk.F)
            fh.write(f"block dim={blk.dim}\n")
            for M in stack:
                flat = np.asarray(M, dtype=np.complex128).ravel()
                fh.write(" ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in flat) + "\n")


def load_problem(path: str) -> SdpProblem:
    """Read back a dump_problem file (dense blocks only)."""
    with open(path) as fh:
        header = fh.readline().split()
        m = int(header[1].split("=")[1])
        c = np.array([float(tok) for tok in fh.readline().split()])
        blocks = []
        line = fh.readline()
        while line:
            dim = int(line.split("dim=")[1])
            stack = []
            for _ in range(m + 1):
                vals = np.array([float(t) for t in fh.readline().split()])
                stack.append((vals[0::2] + 1j * vals[1::2]).reshape(dim, dim))
            blocks.append(DenseBlock(stack[0], np.array(stack[1:])))
            line = fh.readline()
    return SdpProblem(num_vars=m, c=c, blocks=blocks)
