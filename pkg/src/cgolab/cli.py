"""Batch runner: ``cgolab validate|run|plot``.

A config is a YAML or TOML file with nested sections::

    problem: schrodinger          # schrodinger | maxwell | reduce_verify | bounds_table
    grid: {n: 32, L: 1.5}
    media:
      sigma1: [{center: [0.1, 0, 0], radius: 0.6, norm: 0.1}]
      sigma2: [{center: [-0.1, 0.1, 0], radius: 0.5, amplitude: 1e-3}]
      c1: []
      c2: []
    sweep: {omegas: [2, 4, 8, 16], epsilons: [1e-6]}
    params: {s: 2, R_star: 1.0, noise_mode: adversarial, seed: 0, tol: 1e-10}
    output: {csv: sweep.csv, plot: sweep.svg}

A bump gives either ``amplitude`` or ``norm``; ``norm`` rescales it to that
Sobolev norm of order ``2s`` (scalar media) or ``2s + 2`` (Maxwell media).

Exit codes: 0 success, 2 config error, 3 numerical failure in at least one cell.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds
from .errors import NumericalError
from .maxwell_recon import MaxwellCurve, stability_sweep_maxwell
from .maxwell_reduce import band_limited_field, derive_medium, verify_factorization
from .schro_recon import ADVERSARIAL, RANDOM, StabilityCurve, assemble_q, stability_sweep
from .spectral_field import GridSpec, ScalarField, bump_with_norm, synth_bump

log = logging.getLogger("cgolab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
PROBLEMS = ("schrodinger", "maxwell", "reduce_verify", "bounds_table")
PLOT_KINDS = ("error_vs_omega", "error_vs_eps", "bound_overlay")

SCHEMA = {
    "problem": None,
    "grid": {"n": None, "L": None},
    "media": {"sigma1": None, "sigma2": None, "c1": None, "c2": None},
    "sweep": {"omegas": None, "epsilons": None},
    "params": {"s": None, "R_star": None, "noise_mode": None, "seed": None, "tol": None,
               "optimal_frequency": None},
    "output": {"csv": None, "plot": None},
}
BUMP_KEYS = {"center", "radius", "amplitude", "norm"}

BOUNDS_COLUMNS = ("omega", "epsilon", "s", "bound_schrodinger", "schrodinger_regime", "schrodinger_T",
                  "bound_term1", "bound_term2", "bound_term3", "bound_maxwell", "maxwell_regime", "maxwell_T",
                  "t_star")
REDUCE_COLUMNS = ("omega", "identity", "residual", "sigma_norm")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def load_config(path: str | Path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python 3.10
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"{path}: {exc}"]) from exc
    import yaml

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a mapping"])
    return data


def _unknown_keys(data: dict, schema: dict, prefix: str = "") -> list[str]:
    out = []
    for key, val in data.items():
        name = f"{prefix}{key}"
        if key not in schema:
            out.append(f"{name}: unknown key")
        elif isinstance(schema[key], dict):
            if not isinstance(val, dict):
                out.append(f"{name}: must be a mapping")
            else:
                out.extend(_unknown_keys(val, schema[key], name + "."))
    return out


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(cfg: dict) -> list[str]:
    """All invariant violations of ``cfg``; empty when it is runnable."""
    problems = _unknown_keys(cfg, SCHEMA)
    problem = cfg.get("problem")
    if problem not in PROBLEMS:
        problems.append(f"problem: must be one of {', '.join(PROBLEMS)}")
    grid = cfg.get("grid", {}) if isinstance(cfg.get("grid", {}), dict) else {}
    n, L = grid.get("n", 32), grid.get("L", 1.5)
    if not isinstance(n, int) or isinstance(n, bool) or n < 8 or n & (n - 1):
        problems.append("grid.n: must be a power of two >= 8")
    if not _is_num(L) or L <= 1:
        problems.append("grid.L: must exceed 1")
    params = cfg.get("params", {}) if isinstance(cfg.get("params", {}), dict) else {}
    s = params.get("s", 2.0)
    if not _is_num(s):
        problems.append("params.s: must be a number")
    elif s <= 1.5:
        problems.append("params.s: s must exceed 3/2")
    elif params.get("optimal_frequency") and s <= 2.5:
        problems.append("params.s: optimal-frequency runs need s > 5/2")
    if params.get("noise_mode", ADVERSARIAL) not in (ADVERSARIAL, RANDOM):
        problems.append(f"params.noise_mode: must be {ADVERSARIAL} or {RANDOM}")
    seed = params.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        problems.append("params.seed: must be an unsigned 64-bit integer")
    for key in ("R_star", "tol"):
        if key in params and (not _is_num(params[key]) or params[key] <= 0):
            problems.append(f"params.{key}: must be positive")
    sweep = cfg.get("sweep", {}) if isinstance(cfg.get("sweep", {}), dict) else {}
    omegas, eps = sweep.get("omegas"), sweep.get("epsilons")
    if not isinstance(omegas, list) or not omegas or not all(_is_num(w) and w > 1 for w in omegas):
        problems.append("sweep.omegas: must be a nonempty list of numbers > 1")
    if problem != "reduce_verify":
        if not isinstance(eps, list) or not eps or not all(_is_num(e) and 0 < e < 1 for e in eps):
            problems.append("sweep.epsilons: must be a nonempty list in (0, 1)")
    media = cfg.get("media", {}) if isinstance(cfg.get("media", {}), dict) else {}
    needed = {"schrodinger": ("sigma1", "sigma2"), "maxwell": ("sigma1", "sigma2"),
              "reduce_verify": ("sigma1",)}.get(problem, ())
    for name in needed:
        if name not in media:
            problems.append(f"media.{name}: required for {problem}")
    for name, bumps in media.items():
        if name in SCHEMA["media"]:
            problems.extend(_check_bumps(f"media.{name}", bumps))
    out = cfg.get("output", {}) if isinstance(cfg.get("output", {}), dict) else {}
    if not isinstance(out.get("csv"), str):
        problems.append("output.csv: path required")
    if "plot" in out and not isinstance(out["plot"], str):
        problems.append("output.plot: must be a path")
    return problems


def _check_bumps(name: str, bumps) -> list[str]:
    if not isinstance(bumps, list):
        return [f"{name}: must be a list of bumps"]
    out = []
    for i, b in enumerate(bumps):
        tag = f"{name}[{i}]"
        if not isinstance(b, dict):
            out.append(f"{tag}: must be a mapping")
            continue
        extra = set(b) - BUMP_KEYS
        if extra:
            out.append(f"{tag}: unknown key(s) {', '.join(sorted(extra))}")
        c, r = b.get("center"), b.get("radius")
        if not (isinstance(c, list) and len(c) == 3 and all(_is_num(v) for v in c)):
            out.append(f"{tag}.center: must be three numbers")
            continue
        if not _is_num(r) or r <= 0:
            out.append(f"{tag}.radius: must be positive")
            continue
        if ("amplitude" in b) == ("norm" in b):
            out.append(f"{tag}: give exactly one of amplitude, norm")
        elif not _is_num(b.get("amplitude", b.get("norm"))) or b.get("amplitude", b.get("norm")) < 0:
            out.append(f"{tag}: amplitude/norm must be non-negative")
        if float(np.linalg.norm(c)) + r > 1.0:
            out.append(f"{tag}: support violation, bump leaves the unit ball")
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RunReport:
    csv_path: Path
    plot_path: Path | None
    rows: int
    failed_cells: int

    @property
    def exit_code(self) -> int:
        return EXIT_NUMERICAL if self.failed_cells else EXIT_OK


def _field(grid: GridSpec, bumps, order: float) -> ScalarField:
    total = np.zeros(grid.shape)
    for b in bumps or []:
        if "norm" in b:
            f = bump_with_norm(grid, b["center"], b["radius"], b["norm"], order)
        else:
            f = synth_bump(grid, b["center"], b["radius"], b["amplitude"])
        total = total + f.samples.real
    return ScalarField(grid, total)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _rows(curve, columns):
    return [[getattr(r, c) for c in columns] for r in curve.rows]


def run(cfg: dict, out_dir: str | Path = ".", seed: int | None = None, threads: int = 1) -> RunReport:
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    out_dir = Path(out_dir)
    grid_cfg = cfg.get("grid", {})
    grid = GridSpec(grid_cfg.get("n", 32), grid_cfg.get("L", 1.5))
    params = cfg.get("params", {})
    s = float(params.get("s", 2.0))
    seed = int(params.get("seed", 0) if seed is None else seed)
    mode = params.get("noise_mode", ADVERSARIAL)
    media = cfg.get("media", {})
    omegas = [float(w) for w in cfg["sweep"]["omegas"]]
    epsilons = [float(e) for e in cfg["sweep"].get("epsilons", [])]
    problem = cfg["problem"]
    csv_path = out_dir / cfg["output"]["csv"]
    failed = 0

    if problem == "schrodinger":
        sig1, sig2 = _field(grid, media["sigma1"], 2 * s), _field(grid, media["sigma2"], 2 * s)
        c1, c2 = _field(grid, media.get("c1"), 2 * s), _field(grid, media.get("c2"), 2 * s)
        curve = stability_sweep(lambda w: assemble_q(sig1, c1, w, s), lambda w: assemble_q(sig2, c2, w, s),
                                omegas, epsilons, s, float(params.get("R_star", 1.0)), mode, seed, threads)
        columns, rows, failed = StabilityCurve.COLUMNS, _rows(curve, StabilityCurve.COLUMNS), curve.failed_cells
    elif problem == "maxwell":
        sig1, sig2 = _field(grid, media["sigma1"], 2 * s + 2), _field(grid, media["sigma2"], 2 * s + 2)
        curve = stability_sweep_maxwell(lambda w: (derive_medium(sig1, w, s), derive_medium(sig2, w, s)),
                                        omegas, epsilons, s, mode, seed, threads)
        columns, rows, failed = MaxwellCurve.COLUMNS, _rows(curve, MaxwellCurve.COLUMNS), curve.failed_cells
    elif problem == "reduce_verify":
        sig = _field(grid, media["sigma1"], 2 * s + 2)
        columns, rows = REDUCE_COLUMNS, []
        for w in sorted(omegas):
            med = derive_medium(sig, w, s)
            Y = band_limited_field(grid, np.random.default_rng(seed))
            for identity in (1, 2, 3):
                try:
                    res = verify_factorization(med, identity, Y)
                except NumericalError as exc:
                    log.warning("omega=%s identity=%s failed: %s", w, identity, exc)
                    res, failed = math.nan, failed + 1
                rows.append([w, identity, res, med.norm_2s2])
    else:
        columns, rows = BOUNDS_COLUMNS, []
        want_t = bool(params.get("optimal_frequency"))
        for eps in sorted(epsilons):
            E = -math.log(eps)
            t_star = bounds.optimal_frequency(eps, s).t_star if want_t else math.nan
            for w in sorted(omegas):
                ps = bounds.plan_schrodinger(w, E, float(params.get("R_star", 1.0)))
                pm = bounds.plan_maxwell(w, E)
                t1, t2, t3, tot = bounds.bound_maxwell(w, eps, s)
                rows.append([w, eps, s, bounds.bound_schrodinger(w, eps, s), ps.regime, ps.T,
                             t1, t2, t3, tot, pm.regime, pm.T, t_star])

    write_csv(csv_path, columns, rows)
    plot_path = None
    if cfg["output"].get("plot") and problem in ("schrodinger", "maxwell"):
        plot_path = out_dir / cfg["output"]["plot"]
        plot(csv_path, "bound_overlay", plot_path, config_hash(cfg))
    return RunReport(csv_path, plot_path, len(rows), failed)


# -- plotting ------------------------------------------------------------------


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def _bound(row: dict) -> float:
    if "bound_value" in row:
        return float(row["bound_value"])
    return float(row["bound_term1"]) + float(row["bound_term2"]) + float(row["bound_term3"])


def plot(csv_path: str | Path, kind: str, out: str | Path, provenance: str | None = None) -> Path:
    """Static SVG of a sweep CSV; the overlay uses the CSV's fitted_C column."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}")
    rows = read_csv(csv_path)
    need = {"omega", "epsilon", "err_minus_s", "fitted_C"}
    if not need <= set(rows[0]) or not ({"bound_value"} <= set(rows[0]) or {"bound_term1"} <= set(rows[0])):
        raise ValueError(f"{csv_path}: not a sweep CSV")
    if provenance is None:
        provenance = hashlib.sha256(Path(csv_path).read_bytes()).hexdigest()[:16]
    x_key, group_key = ("epsilon", "omega") if kind == "error_vs_eps" else ("omega", "epsilon")
    groups: dict[float, list[dict]] = {}
    for r in rows:
        groups.setdefault(float(r[group_key]), []).append(r)
    # fixed salt keeps the SVG element ids, and so the file bytes, reproducible
    plt.rcParams["svg.hashsalt"] = provenance
    fig, ax = plt.subplots(figsize=(6, 4))
    for g, rs in sorted(groups.items()):
        rs = sorted(rs, key=lambda r: float(r[x_key]))
        x = [float(r[x_key]) for r in rs]
        ax.plot(x, [float(r["err_minus_s"]) for r in rs], "o-", label=f"{group_key}={g:g}")
        if kind == "bound_overlay":
            ax.plot(x, [float(r["fitted_C"]) * _bound(r) for r in rs], "--", color=ax.lines[-1].get_color())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_key)
    ax.set_ylabel("H^-s error")
    ax.legend(fontsize="small")
    fig.tight_layout()
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Description": f"config {provenance}", "Date": None})
    plt.close(fig)
    return out


# -- entry point -----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cgolab")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("validate", help="check a config")
    v.add_argument("--config", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--out", default=".")
    pl = sub.add_parser("plot", help="plot a sweep CSV")
    pl.add_argument("csv")
    pl.add_argument("--kind", choices=PLOT_KINDS, default="bound_overlay")
    pl.add_argument("--config", help="config whose hash is embedded in the figure")
    pl.add_argument("--out", required=True, help="output SVG path")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            prov = config_hash(load_config(args.config)) if args.config else None
            plot(args.csv, args.kind, args.out, prov)
            return EXIT_OK
        cfg = load_config(args.config)
        if args.command == "validate":
            problems = validate(cfg)
            for msg in problems:
                print(msg)
            return EXIT_CONFIG if problems else EXIT_OK
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(["--seed: must be an unsigned 64-bit integer"])
        report = run(cfg, args.out, args.seed, args.threads)
        print(f"wrote {report.rows} rows to {report.csv_path}")
        if report.failed_cells:
            print(f"{report.failed_cells} cell(s) had numerical failures", file=sys.stderr)
        return report.exit_code
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
