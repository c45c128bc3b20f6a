"""Batch driver.

A run is described by a plain-text config of ``key: value`` lines::

    system: particle            # or spin
    operator: kerr.txt          # relative to the config file
    reps: P, Q, W
    boundary: 1.2 0 1.2 0; 0.5 0.1 0.5 -0.1    # Re z_i, Im z_i, Re zbar_f, Im zbar_f
    T: 0.5, 1
    M: 400                      # a list for sweep and discrete-check
    task: compare               # transform | propagate | compare | discrete-check | sweep
    schemes: Prep, Qrep         # discrete-check only
    nmax: 64                    # oracle starting truncation (particle)
    tol: 1e-12                  # oracle tolerance (particle)
    out: result.csv

Exit status is 0 on success, 1 if any row failed numerically (the row carries
the error tag in its ``status`` column) and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

from .discrete import Scheme, discrete_report
from .errors import CohPropError, ConfigError
from .exact import exact_propagator_particle, exact_propagator_spin
from .propagator import propagate_particle, propagate_spin
from .spin import SpinOperator, spin_symbol_of_operator
from .symbols import NormalOrderedOperator, Rep, SymbolPolynomial, convert_symbol, operator_from_symbol, symbol_of_operator
from .textio import csv_text, format_particle, read_operator

TASKS = ("transform", "propagate", "compare", "discrete-check", "sweep")

_KEYS = {"system", "operator", "reps", "rep", "boundary", "t", "m", "two_j", "nmax", "tol", "task", "schemes", "out", "threads"}


@dataclass(frozen=True)
class RunConfig:
    task: str
    system: str
    operator: Path
    reps: tuple = (Rep.W,)
    boundary: tuple = ()
    T: tuple = ()
    M: tuple = (400,)
    two_j: int | None = None
    nmax: int | None = None
    tol: float = 1e-12
    schemes: tuple = (Scheme.P, Scheme.Q)
    out: Path | None = None
    threads: int = 1


def _split(value: str, sep=","):
    items = [v.strip() for v in value.split(sep)]
    return [v for v in items if v]


def _boundary(value: str):
    pts = []
    for chunk in _split(value, ";"):
        parts = chunk.replace(",", " ").split()
        if len(parts) != 4:
            raise ConfigError(f"boundary point needs four reals, got {chunk!r}")
        a, b, c, d = (float(p) for p in parts)
        pts.append((complex(a, b), complex(c, d)))
    return tuple(pts)


def parse_config(text: str, base: Path = Path(".")) -> RunConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if not sep or key not in _KEYS:
            raise ConfigError(f"config line {lineno}: unrecognized entry {line!r}")
        raw[key] = value.strip()
    try:
        kw = {}
        kw["task"] = raw.get("task", "")
        kw["system"] = raw.get("system", "particle").lower()
        if "operator" not in raw:
            raise ConfigError("config needs an 'operator' file")
        kw["operator"] = (base / raw["operator"]).resolve()
        reps = raw.get("reps", raw.get("rep"))
        if reps is not None:
            kw["reps"] = tuple(Rep(r.upper()) for r in _split(reps))
        if "boundary" in raw:
            kw["boundary"] = _boundary(raw["boundary"])
        if "t" in raw:
            kw["T"] = tuple(float(t) for t in _split(raw["t"]))
        if "m" in raw:
            kw["M"] = tuple(int(m) for m in _split(raw["m"]))
        if "two_j" in raw:
            kw["two_j"] = int(raw["two_j"])
        if "nmax" in raw:
            kw["nmax"] = int(raw["nmax"])
        if "tol" in raw:
            kw["tol"] = float(raw["tol"])
        if "schemes" in raw:
            kw["schemes"] = tuple(Scheme(s) for s in _split(raw["schemes"]))
        if "out" in raw:
            kw["out"] = (base / raw["out"]).resolve()
        if "threads" in raw:
            kw["threads"] = int(raw["threads"])
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def validate(cfg: RunConfig):
    if cfg.task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {cfg.task!r}")
    if cfg.system not in ("particle", "spin"):
        raise ConfigError(f"system must be particle or spin; got {cfg.system!r}")
    if not cfg.operator.is_file():
        raise ConfigError(f"operator file {cfg.operator} does not exist")
    if not cfg.reps:
        raise ConfigError("reps must be nonempty")
    if cfg.task != "transform":
        if not cfg.boundary or not cfg.T:
            raise ConfigError("boundary and T lists must be nonempty")
        if not cfg.M or min(cfg.M) < 2:
            raise ConfigError("M must be at least 2")
        if any(t < 0 or not math.isfinite(t) for t in cfg.T):
            raise ConfigError("T must be finite and non-negative")
    if cfg.task == "discrete-check":
        if cfg.system != "particle":
            raise ConfigError("discrete-check is implemented for particles only")
        if not cfg.schemes:
            raise ConfigError("schemes must be nonempty")
        if Scheme.ALT in cfg.schemes and any(m % 2 for m in cfg.M):
            raise ConfigError("the alternating scheme needs even M")
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")


def _load_operator(cfg: RunConfig):
    obj = read_operator(cfg.operator)
    if cfg.system == "spin":
        if not isinstance(obj, SpinOperator):
            raise ConfigError("system is spin but the operator file is a particle file")
        if cfg.two_j is not None and cfg.two_j != obj.j.two_j:
            raise ConfigError(f"two_j {cfg.two_j} disagrees with the operator file ({obj.j.two_j})")
        return obj
    if isinstance(obj, SpinOperator):
        raise ConfigError("system is particle but the operator file is a spin file")
    return obj


# --- tasks -----------------------------------------------------------------------

_PROP_HEADER = (
    "system", "rep", "re_z_i", "im_z_i", "re_zbar_f", "im_zbar_f", "T",
    "re_K", "im_K", "re_iS", "im_iS", "re_sk", "im_sk", "residual",
)
_NAN = float("nan")


def _failed(ident, width, exc: CohPropError):
    return tuple(ident) + (_NAN,) * (width - len(ident)) + (exc.tag,)


def _propagate(op, cfg, rep, z_i, zbar_f, T, M):
    if isinstance(op, SpinOperator):
        return propagate_spin(op, rep, z_i, zbar_f, T, M=M)
    return propagate_particle(op, rep, z_i, zbar_f, T, M=M)


def _exact(op, cfg, z_i, zbar_f, T):
    if isinstance(op, SpinOperator):
        return exact_propagator_spin(op, zbar_f, z_i, T)
    return exact_propagator_particle(op, zbar_f, z_i, T, nmax=cfg.nmax, tol=cfg.tol)


def _task_transform(cfg, obj):
    if isinstance(obj, SpinOperator):
        rows = []
        for rep in cfg.reps:
            sym = spin_symbol_of_operator(obj, rep)
            for (m, n), c in sorted(((k, complex(v)) for k, v in _nonzero(sym.numerator)), key=lambda kv: kv[0]):
                rows.append((rep.value, sym.L, m, n, c.real, c.imag))
        return csv_text(("rep", "L", "m", "n", "re", "im"), rows), False
    parts = []
    for rep in cfg.reps:
        if isinstance(obj, NormalOrderedOperator):
            sym = symbol_of_operator(obj, rep)
        else:
            sym = convert_symbol(obj, rep)
        parts.append(format_particle(sym))
    return "".join(parts), False


def _nonzero(mat):
    for m in range(mat.shape[0]):
        for n in range(mat.shape[1]):
            if mat[m, n] != 0:
                yield (m, n), mat[m, n]


def _map(cfg, fn, items):
    if cfg.threads == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def _task_propagate(cfg, op, compare: bool, Ms):
    items = list(product(cfg.boundary, cfg.T, Ms, cfg.reps))
    header = _PROP_HEADER[:7] + ("M",) + _PROP_HEADER[7:]
    if compare:
        header += ("re_exact", "im_exact", "abs_error", "rel_error")
    header += ("status",)

    def job(item):
        (z_i, zbar_f), T, M, rep = item
        ident = (cfg.system, rep.value, z_i.real, z_i.imag, zbar_f.real, zbar_f.imag, T, M)
        try:
            res = _propagate(op, cfg, rep, z_i, zbar_f, T, M)
            row = res.csv_row(z_i, zbar_f, T)
            row = row[:7] + (M,) + row[7:]
            if compare:
                ex = _exact(op, cfg, z_i, zbar_f, T)
                err = abs(res.value - ex)
                row += (ex.real, ex.imag, err, err / abs(ex) if ex != 0 else _NAN)
            return row + ("ok",)
        except CohPropError as exc:
            return _failed(ident, len(header) - 1, exc)

    rows = _map(cfg, job, items)
    return csv_text(header, rows), any(r[-1] != "ok" for r in rows)


def _task_discrete(cfg, op):
    header = (
        "scheme", "M", "re_z_i", "im_z_i", "re_zbar_f", "im_zbar_f", "T",
        "re_detF", "im_detF", "re_gammaSK", "im_gammaSK", "re_vM1", "im_vM1",
        "identityResidual", "re_kRed", "im_kRed", "status",
    )
    items = list(product(cfg.schemes, cfg.boundary, cfg.T, cfg.M))

    def job(item):
        scheme, (z_i, zbar_f), T, M = item
        ident = (scheme.value, M, z_i.real, z_i.imag, zbar_f.real, zbar_f.imag, T)
        try:
            rep = discrete_report(scheme, op, z_i, zbar_f, T, M)
            r = rep.csv_row()
            return ident + r[2:] + ("ok",)
        except CohPropError as exc:
            return _failed(ident, len(header) - 1, exc)

    rows = _map(cfg, job, items)
    return csv_text(header, rows), any(r[-1] != "ok" for r in rows)


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a validated config; returns (exit status, output text)."""
    validate(cfg)
    obj = _load_operator(cfg)
    if cfg.task == "transform":
        text, failed = _task_transform(cfg, obj)
    else:
        op = obj
        if isinstance(op, SymbolPolynomial):
            op = operator_from_symbol(op)
        if cfg.task == "discrete-check":
            text, failed = _task_discrete(cfg, op)
        elif cfg.task == "sweep":
            text, failed = _task_propagate(cfg, op, True, cfg.M)
        else:
            text, failed = _task_propagate(cfg, op, cfg.task == "compare", cfg.M[:1])
    return (1 if failed else 0), text


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="cohprop", description="Coherent-state propagators: symbols, semiclassics, discrete checks.")
    ap.add_argument("--config", required=True, help="key: value config file")
    ap.add_argument("--task", choices=TASKS, help="overrides the task in the config")
    ap.add_argument("--out", help="output path (default: config 'out', else stdout)")
    ap.add_argument("--threads", type=int, help="worker threads for independent rows")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.task:
            cfg = replace(cfg, task=args.task)
        if args.out:
            cfg = replace(cfg, out=Path(args.out))
        if args.threads is not None:
            cfg = replace(cfg, threads=args.threads)
        status, text = run(cfg)
    except ConfigError as exc:
        print(f"cohprop: {exc}", file=sys.stderr)
        return 2
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)
    if status:
        print("cohprop: some rows failed; see the status column", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
