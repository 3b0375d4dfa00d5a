"""Extended Hubbard chains on the fixed-number sector.

Builds the chain Hamiltonian (hopping, on-site repulsion, nearest-neighbor
coupling) directly on the (2L, N) sector, diagonalizes it exactly, and
sweeps the entanglement robustness of the ground state over a grid of
interaction strengths.  Spin is folded into the mode index: site j carries
modes 2j (up) and 2j + 1 (down).
"""

from __future__ import annotations

import csv
import hashlib
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import fock, witness
from .states import DensityState
from .witness import WitnessConfig

_SPIN = {"up": 0, "down": 1, 0: 0, 1: 1}


@dataclass
class EhmParams:
    L: int
    N: int
    t_h: float = 1.0
    U: float = 0.0
    V: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("need at least two sites")
        if not 0 <= self.N <= 2 * self.L:
            raise ValueError("particle count outside 0..2L")
        if self.t_h <= 0:
            raise ValueError("hopping amplitude must be positive")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")


@dataclass
class SweepGrid:
    u_values: np.ndarray
    v_values: np.ndarray
    witness: WitnessConfig = field(default_factory=WitnessConfig)

    def __post_init__(self):
        self.u_values = np.atleast_1d(np.asarray(self.u_values, dtype=float))
        self.v_values = np.atleast_1d(np.asarray(self.v_values, dtype=float))
        for vals in (self.u_values, self.v_values):
            if vals.size == 0 or not np.all(np.isfinite(vals)):
                raise ValueError("grid axes must be nonempty and finite")


def mode_index(j: int, sigma, L: int | None = None) -> int:
    """Mode of spin `sigma` ("up"/"down" or 0/1) at site j."""
    if sigma not in _SPIN:
        raise ValueError(f"unknown spin label {sigma!r}")
    if j < 0 or (L is not None and j >= L):
        raise ValueError(f"site {j} outside the chain")
    return 2 * j + _SPIN[sigma]


def _bonds(p: EhmParams):
    last = p.L if p.boundary == "periodic" else p.L - 1
    return [(j, (j + 1) % p.L) for j in range(last)]


def build_hamiltonian(p: EhmParams) -> np.ndarray:
    """Dense sector Hamiltonian on (2L, N).

    Hopping enters through the quadratic kernel; both interaction terms are
    diagonal in the occupation basis, so they come straight from the
    occupancy table.  Periodic chains include the L-1 -> 0 wraparound bond
    (which double-counts the single bond at L = 2; use open boundary there
    if that matters).
    """
    d = 2 * p.L
    h = np.zeros((d, d), dtype=np.complex128)
    for a, b in _bonds(p):
        for s in (0, 1):
            h[mode_index(a, s), mode_index(b, s)] -= p.t_h
            h[mode_index(b, s), mode_index(a, s)] -= p.t_h
    H = np.array(fock.one_body_operator(d, p.N, h))

    occ = fock.occupancy_table(d, p.N).astype(float)
    n_up, n_dn = occ[:, 0::2], occ[:, 1::2]
    n_site = n_up + n_dn
    diag = p.U * (n_up * n_dn).sum(axis=1)
    for a, b in _bonds(p):
        diag += p.V * n_site[:, a] * n_site[:, b]
    H[np.diag_indices_from(H)] += diag
    return H


def ground_state(H: np.ndarray, d: int, n: int,
                 tol: float | None = None) -> tuple[float, DensityState, bool]:
    """Lowest eigenvalue, its state, and a degeneracy flag.

    When the gap to the next level falls below `tol` (default 1e-8 times
    the spectral norm) the returned state is the equal-weight mixture over
    the whole near-degenerate eigenspace and the flag is set.
    """
    w, Q = np.linalg.eigh(H)
    if tol is None:
        tol = 1e-8 * max(np.abs(w[0]), np.abs(w[-1]), 1e-12)
    k = int(np.searchsorted(w, w[0] + tol, side="right"))
    block = Q[:, :k]
    rho = DensityState(d=d, n=n, op=(block @ block.conj().T) / k,
                       metadata={"kind": "ground", "energy": float(w[0])})
    return float(w[0]), rho, k > 1


# ---------------------------------------------------------------------------
# phase-diagram sweep
# ---------------------------------------------------------------------------

_CSV_HEADER = ["u_over_t", "v_over_t", "energy", "degenerate",
               "robustness", "validation_min", "status"]


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _point_seed(base: int, i: int, j: int) -> int:
    digest = hashlib.sha256(f"{base}:{i}:{j}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _evaluate_point(p: EhmParams, u: float, v: float,
                    cfg: WitnessConfig) -> dict:
    row = {"u_over_t": u, "v_over_t": v, "energy": np.nan, "degenerate": 0,
           "robustness": np.nan, "validation_min": np.nan, "status": "ok"}
    try:
        params = replace(p, U=u * p.t_h, V=v * p.t_h)
        H = build_hamiltonian(params)
        energy, rho, degen = ground_state(H, 2 * params.L, params.N)
        row["energy"] = energy
        row["degenerate"] = int(degen)
        res = witness.optimal_witness(rho, cfg)
        row["robustness"] = res.robustness
        row["validation_min"] = res.validation_min
        if res.status != "optimal":
            row["status"] = res.status
    except Exception as exc:  # noqa: BLE001 - sweep must survive bad points
        row["status"] = f"error:{type(exc).__name__}"
    return row


def _load_done(path: str) -> dict:
    done = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            key = (rec["u_over_t"], rec["v_over_t"])
            done[key] = {
                "u_over_t": float(rec["u_over_t"]),
                "v_over_t": float(rec["v_over_t"]),
                "energy": float(rec["energy"]),
                "degenerate": int(rec["degenerate"]),
                "robustness": float(rec["robustness"]),
                "validation_min": float(rec["validation_min"]),
                "status": rec["status"],
            }
    return done


def phase_diagram(grid: SweepGrid, p: EhmParams, path: str | None = None,
                  workers: int = 1, seed: int = 0,
                  resume: bool = False) -> list[dict]:
    """Sweep the robustness of the ground state over (U/t, V/t).

    Each grid point builds and diagonalizes its own Hamiltonian and runs
    the witness optimization with a seed derived from (seed, i, j), so
    points are independent and the sweep is restartable: with `resume`,
    rows already present in `path` are kept as-is and only missing points
    run.  Rows are flushed as they complete; solver failures land in the
    row's status column and the sweep keeps going.
    """
    done = {}
    if resume and path is not None and os.path.exists(path):
        done = _load_done(path)

    points = [(i, j, float(u), float(v))
              for i, u in enumerate(grid.u_values)
              for j, v in enumerate(grid.v_values)]
    todo = [pt for pt in points if (_fmt(pt[2]), _fmt(pt[3])) not in done]

    sink = None
    lock = threading.Lock()
    if path is not None:
        fresh = not (resume and os.path.exists(path))
        sink = open(path, "w" if fresh else "a", newline="")
        writer = csv.writer(sink)
        if fresh:
            writer.writerow(_CSV_HEADER)
            sink.flush()

    def run(pt):
        i, j, u, v = pt
        cfg = replace(grid.witness, seed=_point_seed(seed, i, j))
        row = _evaluate_point(p, u, v, cfg)
        if sink is not None:
            with lock:
                writer.writerow([
                    _fmt(row["u_over_t"]), _fmt(row["v_over_t"]),
                    _fmt(row["energy"]), row["degenerate"],
                    _fmt(row["robustness"]), _fmt(row["validation_min"]),
                    row["status"],
                ])
                sink.flush()
        return (i, j), row

    results = dict()
    try:
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for key, row in pool.map(run, todo):
                    results[key] = row
        else:
            for pt in todo:
                key, row = run(pt)
                results[key] = row
    finally:
        if sink is not None:
            sink.close()

    rows = []
    for i, j, u, v in points:
        if (i, j) in results:
            rows.append(results[(i, j)])
        else:
            rows.append(done[(_fmt(u), _fmt(v))])
    return rows


# ---------------------------------------------------------------------------
# region structure of a sweep surface
# ---------------------------------------------------------------------------

def region_labels(values: np.ndarray, k: int = 3) -> np.ndarray:
    """Cluster a 2-D surface into k levels by 1-D Lloyd iteration."""
    flat = np.asarray(values, dtype=float).ravel()
    centers = np.quantile(flat, np.linspace(0, 1, 2 * k + 1)[1::2])
    for _ in range(100):
        labels = np.argmin(np.abs(flat[:, None] - centers[None, :]), axis=1)
        new = np.array([flat[labels == c].mean() if np.any(labels == c)
                        else centers[c] for c in range(k)])
        if np.allclose(new, centers):
            break
        centers = new
    return labels.reshape(np.asarray(values).shape)


def count_regions(labels: np.ndarray) -> int:
    """Connected components of a label grid under 4-neighbor adjacency."""
    labels = np.asarray(labels)
    seen = np.zeros(labels.shape, dtype=bool)
    regions = 0
    for start in np.ndindex(labels.shape):
        if seen[start]:
            continue
        regions += 1
        stack = [start]
        seen[start] = True
        while stack:
            a, b = stack.pop()
            for x, y in ((a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)):
                if (0 <= x < labels.shape[0] and 0 <= y < labels.shape[1]
                        and not seen[x, y] and labels[x, y] == labels[a, b]):
                    seen[x, y] = True
                    stack.append((x, y))
    return regions
