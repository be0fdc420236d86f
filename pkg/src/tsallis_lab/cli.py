"""``tsallis-lab`` command line.

Exit codes: 0 success, 1 a checked claim failed, 2 usage or config error,
3 resolution or degeneracy error.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__, config as cfgmod
from .concavity import concavity_scan
from .errors import ConfigError, LabError
from .experiments import (TRIAL_COLUMNS, random_mixture, run_trial, torus_density,
                          trial_rng)
from .extremal import DEFAULT_BANDWIDTH, DensityParam, maximize, report_gap
from .grid import TorusGrid
from .inequalities import dump_finding
from .mixtures import GaussianMixture

EXIT_OK, EXIT_CLAIM, EXIT_USAGE, EXIT_RESOLUTION = 0, 1, 2, 3


def fmt(x) -> str:
    """17 significant digits for floats; everything else as text."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


def _load(ctx_obj, config_path, out, seed, dim, backend, trials) -> cfgmod.RunConfig:
    cfg = cfgmod.load(config_path)
    raw = cfg.to_dict()
    raw["extremal"] = cfg.extremal
    for key, val in (("output_dir", out), ("seed", seed), ("dimension", dim),
                     ("backend", backend), ("trials", trials)):
        if val is not None:
            raw[key] = val
    return cfgmod.RunConfig(**raw)


def _prepare_out(cfg: cfgmod.RunConfig, command: str) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "version": __version__, "seed": cfg.seed,
                "config": cfg.to_dict()}
    (out / f"manifest_{command}.json").write_text(json.dumps(manifest, indent=1))
    return out


def _initial(cfg: cfgmod.RunConfig, rng):
    if cfg.backend == "torus":
        return torus_density(cfg.dimension, rng, cfg.grid_n, *cfg.density_params,
                             length=cfg.length)
    if cfg.mixture:
        m = GaussianMixture.from_records(cfg.mixture)
        if m.dim != cfg.dimension:
            raise ConfigError(f"mixture dimension {m.dim} != dimension {cfg.dimension}")
        return m
    return random_mixture(cfg.dimension, rng, cfg.mixture_components)


def _fail(code: int, msg: str):
    click.echo(msg, err=True)
    sys.exit(code)


def _guard(fn):
    """Map library errors onto exit codes."""
    def wrapper(*a, **kw):
        try:
            return fn(*a, **kw)
        except ConfigError as exc:
            _fail(EXIT_USAGE, f"config error: {exc}")
        except LabError as exc:
            _fail(exc.exit_code, f"{type(exc).__name__}: {exc}")
        except (ValueError, TypeError) as exc:
            _fail(EXIT_USAGE, f"error: {exc}")
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def common(fn):
    fn = click.option("--trials", type=int, default=None, help="Override trial count.")(fn)
    fn = click.option("--backend", type=click.Choice(["torus", "mixture"]), default=None)(fn)
    fn = click.option("--dim", type=click.IntRange(1, 3), default=None, help="Override dimension.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the config seed.")(fn)
    fn = click.option("--threads", type=click.IntRange(1), default=1, show_default=True)(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None,
                      help="Output directory.")(fn)
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False),
                      default=None, help="YAML run configuration.")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Numerical laboratory for Tsallis-entropy concavity along the heat flow."""


@main.command("verify-identities")
@common
@_guard
def verify_identities(config_path, out, threads, seed, dim, backend, trials):
    """Randomized identity, IBP and inequality-margin trials (one CSV row each)."""
    cfg = _load(None, config_path, out, seed, dim, backend, trials)
    outdir = _prepare_out(cfg, "verify-identities")

    def one(i):
        rng = trial_rng(cfg.seed, i)
        dens = _initial(cfg, rng)
        return [run_trial(dens, dl, cfg.tol, trial=i, seed=cfg.seed) for dl in cfg.delta_list], dens

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, range(cfg.trials)))
    else:
        results = [one(i) for i in range(cfg.trials)]
    rows, first_fail = [], None
    for outcomes, dens in results:
        for o in outcomes:
            rows.append(o.row)
            if o.failures and first_fail is None:
                first_fail = (o, dens)
            for m in o.margins:
                if m.margin < -cfg.tol["margin"] * abs(m.rhs) and m.name != "cross_nonneg_1d":
                    dump_finding(outdir / "findings", m, dens, trial=o.row["trial"],
                                 seed=cfg.seed, delta=o.row["delta"])
    write_csv(outdir / "identities.csv", TRIAL_COLUMNS, rows)
    worst = max(max((v for k, v in r.items() if k in ("id36", "id37", "ibp_1", "ibp_2",
               "ibp_3", "ibp_4a", "ibp_4b") and v is not None), default=0.0) for r in rows)
    click.echo(f"{len(rows)} trial rows, worst identity residual {fmt(worst)} -> {outdir}")
    if first_fail is not None:
        o, _ = first_fail
        _fail(EXIT_CLAIM, f"trial {o.row['trial']} (delta={o.row['delta']}) failed: "
                          + "; ".join(o.failures))


@main.command("scan-concavity")
@common
@_guard
def scan_concavity(config_path, out, threads, seed, dim, backend, trials):
    """Second time derivatives of S_q over a (q, t) grid, with FD oracles."""
    cfg = _load(None, config_path, out, seed, dim, backend, trials)
    outdir = _prepare_out(cfg, "scan-concavity")
    summary, ok = [], True
    for i in range(cfg.trials):
        init = _initial(cfg, trial_rng(cfg.seed, i))
        scan = concavity_scan(init, cfg.qs, cfg.t_list, cfg.order_check, threads)
        scan.descriptor.update(trial=i, seed=cfg.seed)
        scan.write_csv(outdir / f"scan_{i:04d}.csv")
        scan.write_json(outdir / f"scan_{i:04d}.json")
        s = scan.sign_summary(cfg.tol["concavity"])
        summary.append(s)
        if not scan.passed(cfg.tol["concavity"]):
            ok = False
            bad = scan.violations(cfg.tol["concavity"])
            what = (f"row q={bad[0].q} t={bad[0].t} d2_dt2_Sq={fmt(bad[0].d2_dt2_Sq)}"
                    if bad else scan.order_failures[0])
            click.echo(f"scan {i} failed: {what}", err=True)
    rows = sum(s["rows"] for s in summary)
    pos = sum(s["positive_asserted"] for s in summary)
    click.echo(f"{rows} rows in {cfg.trials} scans, {pos} asserted rows with d2S/dt2 > tol -> {outdir}")
    if not ok:
        sys.exit(EXIT_CLAIM)


@main.command("extremal")
@common
@_guard
def extremal(config_path, out, threads, seed, dim, backend, trials):
    """Multi-start search for large inequality ratios."""
    cfg = _load(None, config_path, out, seed, dim, backend, trials)
    if cfg.backend != "torus":
        raise ConfigError("the extremal search runs on the torus backend")
    outdir = _prepare_out(cfg, "extremal")
    ex = cfg.extremal
    n = ex.n or cfg.n or cfgmod.DEFAULT_N[cfg.dimension]
    param = DensityParam(TorusGrid(cfg.dimension, n, cfg.length),
                         ex.bandwidth or DEFAULT_BANDWIDTH[cfg.dimension])
    findings = 0
    for obj in ex.objectives:
        res = maximize(obj, param, cfg.seed, ex.starts, ex.budget, ex.amplitude,
                       ex.delta, ex.refine, threads)
        res.write(outdir / f"extremal_{obj}.json")
        g = report_gap(res)
        findings += len(res.findings)
        click.echo(f"{obj}: best {fmt(g.best_ratio)} constant {fmt(g.constant)} gap {fmt(g.gap)}")
    if findings:
        _fail(EXIT_CLAIM, f"{findings} candidates exceeded a constant; see extremal_*.json")


# -- report -----------------------------------------------------------------

def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _num(s):
    if s in ("", None):
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return float(s)
    except ValueError:
        return s


def collect(run_dirs) -> list[tuple]:
    """Tidy records ``(run, artifact, metric, key, value)``, sorted."""
    recs = []
    for d in sorted({str(Path(r).resolve()) for r in run_dirs}):
        run = Path(d)
        for f in sorted(run.glob("identities.csv")):
            for r in _read_csv(f):
                key = f"trial={int(float(r['trial']))},delta={r['delta']}"
                for k, v in r.items():
                    val = _num(v)
                    if isinstance(val, float) and k not in ("trial", "seed", "dim", "delta", "q", "resolution"):
                        recs.append((run.name, f.name, k, key, val))
        for f in sorted(run.glob("scan_*.json")):
            data = json.loads(f.read_text())
            cols = data["columns"]
            for row in data["rows"]:
                r = dict(zip(cols, row))
                key = f"q={r['q']},t={r['t']}"
                for k in ("d2_dt2_Sq", "scale", "fd_gap", "fd_order", "exploratory"):
                    recs.append((run.name, f.name, k, key, float(r[k])))
        for f in sorted(run.glob("extremal_*.json")):
            data = json.loads(f.read_text())
            recs.append((run.name, f.name, "best_ratio", data["objective"], float(data["best_ratio"])))
            recs.append((run.name, f.name, "gap", data["objective"],
                         float(data["constant"]) - float(data["best_ratio"])))
    return sorted(recs, key=lambda r: (r[0], r[1], r[2], r[3]))


def summarize(recs) -> list[str]:
    lines = []
    by = {}
    for run, art, metric, key, val in recs:
        by.setdefault(metric, []).append(val)
    for name in ("id36", "id37", "ibp_1", "ibp_2", "ibp_3", "ibp_4a", "ibp_4b",
                 "bochner_pointwise_max", "one_d_reduction", "decomposition"):
        vals = [v for v in by.get(name, []) if not math.isnan(v)]
        if vals:
            lines.append(f"worst {name}: {fmt(max(vals))}")
    for name in ("cross_sqrt5", "quartic_2sqrt5_6", "cross_nonneg_1d", "cross_3_1d"):
        m, rhs = by.get(f"{name}_margin"), by.get(f"{name}_rhs")
        if m:
            rel = [a / b if b else a for a, b in zip(m, rhs)]
            lines.append(f"min margin {name}: {fmt(min(m))} (relative {fmt(min(rel))})")
    if "d2_dt2_Sq" in by:
        sq, sc, ex = by["d2_dt2_Sq"], by["scale"], by["exploratory"]
        asserted = [(a, b) for a, b, e in zip(sq, sc, ex) if not e]
        pos = sum(1 for a, b in asserted if a > 1e-8 * b)
        lines.append(f"scan rows: {len(sq)} ({len(asserted)} asserted), positive d2S/dt2: {pos}")
        lines.append(f"max d2S/dt2 over scale (asserted): {fmt(max((a / b if b else a) for a, b in asserted) if asserted else float('nan'))}")
    for metric in ("best_ratio", "gap"):
        for run, art, m, key, val in recs:
            if m == metric:
                lines.append(f"{metric} {key} [{run}]: {fmt(val)}")
    return lines


@main.command("report")
@click.argument("run_dirs", nargs=-1, type=click.Path(file_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Where to write the tidy CSV (default: stdout summary only).")
def report(run_dirs, out):
    """Aggregate one or more run directories into a summary and a tidy CSV."""
    recs = collect(run_dirs) if run_dirs else []
    if not recs:
        _fail(EXIT_USAGE, "no artifacts")
    for line in summarize(recs):
        click.echo(line)
    if out:
        write_csv(Path(out), ("run", "artifact", "metric", "key", "value"),
                  [dict(zip(("run", "artifact", "metric", "key", "value"), r)) for r in recs])


if __name__ == "__main__":  # pragma: no cover
    main()
