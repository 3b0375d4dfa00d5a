"""Command-line surface and the on-disk formats shared by all experiments.

States and witnesses are stored as JSON (exact decimal round-trip via the
shortest float representation, which parses back bit-for-bit); sweep
tables are CSV.  Every command that writes an output file also writes a
run manifest beside it with the full parameter set, seeds, code version
and wall time.

Exit codes: 0 success, 2 input error, 3 solver error.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from dataclasses import replace

import click
import numpy as np

from . import __version__, concurrence, fock, hubbard, states, witness
from . import discord as discord_mod
from .states import DensityState

BASIS_ORDER = "lex-bitmask"


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _matrix_to_pairs(op: np.ndarray) -> list:
    """Row-major [re, im] pairs; plain floats so JSON round-trips exactly."""
    return [[float(x.real), float(x.imag)] for row in np.asarray(op) for x in row]


def _pairs_to_matrix(pairs, D: int, field: str) -> np.ndarray:
    if not isinstance(pairs, list) or len(pairs) != D * D:
        raise ValueError(
            f"field '{field}': expected {D * D} [re, im] pairs, got "
            f"{len(pairs) if isinstance(pairs, list) else type(pairs).__name__}")
    flat = np.empty(D * D, dtype=np.complex128)
    for k, entry in enumerate(pairs):
        if not (isinstance(entry, list) and len(entry) == 2):
            raise ValueError(f"field '{field}': entry {k} is not a [re, im] pair")
        flat[k] = complex(entry[0], entry[1])
    return flat.reshape(D, D)


def state_to_dict(rho: DensityState) -> dict:
    return {
        "d": rho.d,
        "n": rho.n,
        "basis_order": BASIS_ORDER,
        "matrix": _matrix_to_pairs(rho.op),
        "metadata": rho.metadata or {},
    }


def state_from_dict(data: dict) -> DensityState:
    for key in ("d", "n", "basis_order", "matrix"):
        if key not in data:
            raise ValueError(f"missing field '{key}'")
    if data["basis_order"] != BASIS_ORDER:
        raise ValueError(f"field 'basis_order': unsupported value {data['basis_order']!r}")
    d, n = int(data["d"]), int(data["n"])
    if not 0 <= n <= d:
        raise ValueError(f"field 'n': {n} outside 0..d")
    D = fock.sector_dimension(d, n)
    op = _pairs_to_matrix(data["matrix"], D, "matrix")
    rho = DensityState(d=d, n=n, op=op, metadata=data.get("metadata") or {})
    try:
        rho.validate()
    except ValueError as exc:
        raise ValueError(f"field 'matrix': {exc}") from exc
    return rho


def write_state(path: str, rho: DensityState) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_dict(rho), fh, indent=2)
        fh.write("\n")


def read_state(path: str) -> DensityState:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    try:
        return state_from_dict(data)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def witness_to_dict(d: int, n: int, result: witness.WitnessResult) -> dict:
    return {
        "d": d,
        "n": n,
        "basis_order": BASIS_ORDER,
        "matrix": _matrix_to_pairs(result.W),
        "report": result.report(),
    }


def write_witness(path: str, d: int, n: int, result: witness.WitnessResult) -> None:
    with open(path, "w") as fh:
        json.dump(witness_to_dict(d, n, result), fh, indent=2)
        fh.write("\n")


def read_witness(path: str) -> tuple[int, int, np.ndarray, dict]:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    for key in ("d", "n", "matrix"):
        if key not in data:
            raise ValueError(f"{path}: missing field '{key}'")
    d, n = int(data["d"]), int(data["n"])
    D = fock.sector_dimension(d, n)
    W = _pairs_to_matrix(data["matrix"], D, "matrix")
    return d, n, W, data.get("report") or {}


def write_manifest(out_path: str, command: str, params: dict,
                   wall_time: float) -> str:
    """Reproduction record written beside `out_path`."""
    manifest = {
        "command": command,
        "parameters": params,
        "seeds": {"base": params.get("seed", 0)},
        "version": __version__,
        "wall_time_s": round(wall_time, 3),
    }
    path = f"{out_path}.manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _fmt(x) -> str:
    return f"{float(x):.12g}"


# ---------------------------------------------------------------------------
# command-line entry points
# ---------------------------------------------------------------------------

def _input_error(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(2)


def _solver_error(msg: str):
    click.echo(f"solver error: {msg}", err=True)
    sys.exit(3)


def _load(path: str) -> DensityState:
    try:
        return read_state(path)
    except (OSError, ValueError) as exc:
        _input_error(str(exc))


def _witness_config(samples, rounds, backend, tol, seed, accuracy=1e-2) -> witness.WitnessConfig:
    cfg = witness.WitnessConfig(seed=seed, backend=backend, accuracy=accuracy)
    if samples is not None:
        cfg.samples = samples
    if rounds is not None:
        cfg.rounds = rounds
    if tol is not None:
        cfg.gap_tol = tol
    return cfg


def _default_threads() -> int:
    env = os.environ.get("FERMIQC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


witness_options = [
    click.option("--samples", type=int, default=None,
                 help="Sampled determinant constraints (default scales with the sector)."),
    click.option("--rounds", type=int, default=None, help="Cutting-plane rounds."),
    click.option("--backend", type=click.Choice(["auto", "ipm", "fo"]), default="auto"),
    click.option("--tol", type=float, default=None, help="Interior-point gap tolerance."),
    click.option("--seed", type=int, default=0),
]


def add_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
@click.version_option(version=__version__, prog_name="fermiqc")
def main():
    """Quantum-correlation measures for fixed-number fermionic states."""


@main.command("concurrence")
@click.argument("state_file", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="JSON result path.")
def cmd_concurrence(state_file, out):
    """Print the determinant-pair concurrence of a (4, 2) state."""
    t0 = time.time()
    rho = _load(state_file)
    if (rho.d, rho.n) != (4, 2):
        _input_error(f"concurrence needs the (4, 2) sector, state is ({rho.d}, {rho.n})")
    value = concurrence.concurrence(rho)
    click.echo(_fmt(value))
    if out:
        with open(out, "w") as fh:
            json.dump({"concurrence": value}, fh, indent=2)
            fh.write("\n")
        write_manifest(out, "concurrence", {"state_file": state_file, "out": out},
                       time.time() - t0)


@main.command("robustness")
@click.argument("state_file", type=click.Path())
@add_options(witness_options)
@click.option("--out", type=click.Path(), default=None,
              help="Witness JSON path (default: beside the input).")
def cmd_robustness(state_file, samples, rounds, backend, tol, seed, out):
    """Optimize an entanglement witness and print the robustness."""
    t0 = time.time()
    rho = _load(state_file)
    cfg = _witness_config(samples, rounds, backend, tol, seed)
    try:
        result = witness.optimal_witness(rho, cfg)
    except Exception as exc:  # noqa: BLE001
        _solver_error(str(exc))
    if result.status != "optimal":
        _solver_error(f"witness solve ended with status {result.status}")
    click.echo(_fmt(result.robustness))
    out = out or (os.path.splitext(state_file)[0] + ".witness.json")
    write_witness(out, rho.d, rho.n, result)
    write_manifest(out, "robustness", {
        "state_file": state_file, "samples": samples, "rounds": rounds,
        "backend": backend, "tol": tol, "seed": seed, "out": out,
    }, time.time() - t0)


@main.command("discord")
@click.argument("state_file", type=click.Path())
@click.option("--restarts", type=int, default=3)
@click.option("--seed", type=int, default=0)
@click.option("--step-budget", type=int, default=400)
@click.option("--single-basis", is_flag=True, default=False,
              help="Restrict both sides to one shared basis.")
@click.option("--out", type=click.Path(), default=None, help="JSON result path.")
def cmd_discord(state_file, restarts, seed, step_budget, single_basis, out):
    """Print the geometric discord of a (4, 2) state."""
    t0 = time.time()
    rho = _load(state_file)
    cfg = discord_mod.DiscordConfig(restarts=restarts, seed=seed,
                                    step_budget=step_budget,
                                    single_basis=single_basis)
    try:
        res = discord_mod.geometric_discord(rho, cfg)
    except ValueError as exc:
        _input_error(str(exc))
    except Exception as exc:  # noqa: BLE001
        _solver_error(str(exc))
    click.echo(_fmt(res.value))
    if out:
        payload = {
            "discord": res.value,
            "restart_values": [float(v) for v in res.restart_values],
            "left_basis": _matrix_to_pairs(res.spec.U),
            "right_basis": _matrix_to_pairs(res.spec.V),
            "weights": [float(w) for w in np.asarray(res.spec.lam).ravel()],
        }
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        write_manifest(out, "discord", {
            "state_file": state_file, "restarts": restarts, "seed": seed,
            "step_budget": step_budget, "single_basis": single_basis, "out": out,
        }, time.time() - t0)


@main.command("scan-random")
@click.option("--count", type=int, required=True)
@click.option("--d", "d", type=int, default=4)
@click.option("--n", "n", type=int, default=2)
@click.option("--mixed", is_flag=True, default=False)
@add_options(witness_options)
@click.option("--out", type=click.Path(), required=True)
def cmd_scan_random(count, d, n, mixed, samples, rounds, backend, tol, seed, out):
    """Sample random states and tabulate concurrence against robustness."""
    if count < 0:
        _input_error("count must be nonnegative")
    t0 = time.time()
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "purity", "concurrence", "robustness"])
        for i in range(count):
            row_seed = np.random.default_rng((seed, i))
            rho = (states.random_mixed(d, n, seed=row_seed) if mixed
                   else states.random_pure(d, n, seed=row_seed))
            purity = float(np.real(np.trace(rho.op @ rho.op)))
            try:
                cs = concurrence.concurrence(rho) if (d, n) == (4, 2) else np.nan
                cfg = _witness_config(samples, rounds, backend, tol,
                                      hubbard._point_seed(seed, i, 0))
                rob = witness.optimal_witness(rho, cfg).robustness
            except Exception as exc:  # noqa: BLE001
                click.echo(f"warning: sample {i} failed: {exc}", err=True)
                cs, rob = np.nan, np.nan
            writer.writerow([i, _fmt(purity), _fmt(cs), _fmt(rob)])
            fh.flush()
    write_manifest(out, "scan-random", {
        "count": count, "d": d, "n": n, "mixed": mixed, "samples": samples,
        "rounds": rounds, "backend": backend, "tol": tol, "seed": seed,
        "out": out,
    }, time.time() - t0)


@main.command("family")
@click.option("--which", type=click.Choice(["gaussian", "linear"]), required=True)
@click.option("--orbitals", "-L", "L", type=int, default=2,
              help="Orbital count of the gaussian family (d = 2L modes).")
@click.option("--p-min", type=float, default=0.0)
@click.option("--p-max", type=float, default=1.0)
@click.option("--p-step", type=float, default=0.05)
@click.option("--measures", type=str, default="robustness",
              help="Comma list from {robustness, discord}.")
@add_options(witness_options)
@click.option("--restarts", type=int, default=2, help="Discord search restarts.")
@click.option("--out", type=click.Path(), required=True)
def cmd_family(which, L, p_min, p_max, p_step, measures, samples, rounds,
               backend, tol, seed, restarts, out):
    """Sweep a one-parameter state family and tabulate the measures."""
    t0 = time.time()
    wanted = {m.strip() for m in measures.split(",") if m.strip()}
    unknown = wanted - {"robustness", "discord"}
    if unknown:
        _input_error(f"unknown measures {sorted(unknown)}")
    if which == "linear":
        L = 2
    if "discord" in wanted and L != 2:
        _input_error("discord is only defined on the d = 4 sector (two orbitals)")
    if p_step <= 0:
        _input_error("p-step must be positive")
    grid = np.arange(p_min, p_max + p_step / 2, p_step)
    rows = []
    for idx, p in enumerate(grid):
        p = float(round(p, 12))
        rho = (states.family_linear(p) if which == "linear"
               else states.family_gaussian(states.FamilyParams(p=p, L=L)))
        rob = disc = np.nan
        try:
            if "robustness" in wanted:
                cfg = _witness_config(samples, rounds, backend, tol,
                                      hubbard._point_seed(seed, idx, 0))
                rob = witness.optimal_witness(rho, cfg).robustness
            if "discord" in wanted:
                dcfg = discord_mod.DiscordConfig(restarts=restarts,
                                                 seed=hubbard._point_seed(seed, idx, 1))
                disc = discord_mod.geometric_discord(rho, dcfg).value
        except Exception as exc:  # noqa: BLE001
            click.echo(f"warning: p={p} failed: {exc}", err=True)
        rows.append((p, rob, disc))
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "robustness", "discord"])
        for p, rob, disc in rows:
            writer.writerow([_fmt(p), _fmt(rob), _fmt(disc)])
    write_manifest(out, "family", {
        "which": which, "L": L, "p_min": p_min, "p_max": p_max,
        "p_step": p_step, "measures": sorted(wanted), "samples": samples,
        "rounds": rounds, "backend": backend, "tol": tol, "seed": seed,
        "restarts": restarts, "out": out,
    }, time.time() - t0)


@main.command("hubbard")
@click.option("--sites", "-L", "L", type=int, default=5)
@click.option("--particles", "-N", "N", type=int, default=5)
@click.option("--hopping", "t_h", type=float, default=1.0)
@click.option("--boundary", type=click.Choice(["periodic", "open"]),
              default="periodic")
@click.option("--grid", type=str, default="9x9", help="Grid shape, e.g. 9x9.")
@click.option("--u-min", type=float, default=-8.0)
@click.option("--u-max", type=float, default=8.0)
@click.option("--v-min", type=float, default=-8.0)
@click.option("--v-max", type=float, default=8.0)
@add_options(witness_options)
@click.option("--threads", type=int, default=None,
              help="Worker threads (default: FERMIQC_THREADS or core count).")
@click.option("--resume", is_flag=True, default=False)
@click.option("--out", type=click.Path(), required=True)
def cmd_hubbard(L, N, t_h, boundary, grid, u_min, u_max, v_min, v_max,
                samples, rounds, backend, tol, seed, threads, resume, out):
    """Sweep the ground-state robustness over the interaction plane."""
    t0 = time.time()
    try:
        nu, nv = (int(s) for s in grid.lower().split("x"))
        if nu < 1 or nv < 1:
            raise ValueError
    except ValueError:
        _input_error(f"bad grid {grid!r}, expected like 9x9")
    try:
        params = hubbard.EhmParams(L=L, N=N, t_h=t_h, boundary=boundary)
    except ValueError as exc:
        _input_error(str(exc))
    cfg = _witness_config(samples, rounds, backend, tol, seed)
    sweep = hubbard.SweepGrid(
        u_values=np.linspace(u_min, u_max, nu) if nu > 1 else [u_min],
        v_values=np.linspace(v_min, v_max, nv) if nv > 1 else [v_min],
        witness=cfg,
    )
    workers = threads if threads is not None else _default_threads()
    try:
        rows = hubbard.phase_diagram(sweep, params, path=out, workers=workers,
                                     seed=seed, resume=resume)
    except Exception as exc:  # noqa: BLE001
        _solver_error(str(exc))
    failed = sum(1 for r in rows if r["status"].startswith("error"))
    click.echo(f"{len(rows)} points, {failed} failed, written to {out}")
    write_manifest(out, "hubbard", {
        "L": L, "N": N, "t_h": t_h, "boundary": boundary, "grid": grid,
        "u_min": u_min, "u_max": u_max, "v_min": v_min, "v_max": v_max,
        "samples": samples, "rounds": rounds, "backend": backend, "tol": tol,
        "seed": seed, "threads": workers, "resume": resume, "out": out,
    }, time.time() - t0)


@main.command("validate-witness")
@click.argument("witness_file", type=click.Path())
@click.option("--samples", type=int, default=10000)
@click.option("--seed", type=int, default=0)
def cmd_validate_witness(witness_file, samples, seed):
    """Re-check a stored witness on fresh determinant states."""
    try:
        d, n, W, _ = read_witness(witness_file)
    except (OSError, ValueError) as exc:
        _input_error(str(exc))
    vmin, max_eig = witness.validate_witness(d, n, W, samples=samples, seed=seed)
    click.echo(f"min {_fmt(vmin)} max_eigenvalue {_fmt(max_eig)}")


if __name__ == "__main__":
    main()
