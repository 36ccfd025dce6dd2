"""Command-line front end.

Every subcommand accepts its options on the command line or from an INI
file given with ``--config``; command-line values win.  The INI file may
hold a ``[common]`` section and one section per subcommand, with keys named
like the long options (``u-steps`` or ``u_steps``).

Exit status: 0 on success, 2 for invalid input or violated preconditions,
3 when a numerical step fails.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import experiments as ex
from .certify import certify_frame
from .deform import AnnuliMap, LinearMap
from .frames import MAX_DENSE_L, FrameReport, fit_to_period, frame_bounds, riesz_bounds, tf_lattice
from .molecules import (
    Envelope,
    MoleculeSet,
    PreconditionError,
    ambiguity_envelope,
    check_molecules,
    verify_lower_bound_transfer,
)
from .pointset import PointSet, read_points
from .report import emit_plot, make_record, write_records
from .tfcore import GridError, PhasePoint, Signal, bump_window, gaussian_window, make_grid, tf_shift

__all__ = ["main", "build_parser", "parse_range", "worker_count", "dominated_matrix"]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def parse_range(text: str) -> list[int]:
    """``"a..b"`` is the doubling sequence ``a, 2a, ... <= b``; commas list values."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = (int(s) for s in text.split(".."))
        if lo < 1 or hi < lo:
            raise ValueError(f"bad range {text!r}")
        out = []
        while lo <= hi:
            out.append(lo)
            lo *= 2
        return out
    return [int(s) for s in text.split(",") if s.strip()]


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(s) for s in str(text).replace(",", " ").split()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# name -> (converter, default, help)
COMMON = {
    "L": (int, 144, "number of samples of the finite model"),
    "window": (str, "gaussian", "gaussian or bump[:radius]"),
    "seed": (int, 0, "master seed"),
    "out": (str, "-", "report file (JSON lines); '-' for stdout"),
    "plot": (str, "", "SVG plot path (a CSV sidecar is written next to it)"),
}
LATTICE = {
    "lattice": (_floats, [1 / math.sqrt(2), 1 / math.sqrt(2)], "lattice steps a b"),
    "points": (str, "", "point-set file (overrides --lattice)"),
    "commensurate": (_bool, True, "adjust lattice steps to divide the period"),
}
OPTIONS: dict[str, dict[str, tuple]] = {
    "frame-bounds": dict(LATTICE),
    "riesz-bounds": dict(LATTICE),
    "deform-sweep": {
        "family": (str, "dilation", "dilation or jitter"),
        "n": (parse_range, [2, 4, 8, 16, 32], "dilation parameters, e.g. 2..32"),
        "eps": (_floats, [0.001, 0.01, 0.05], "jitter sizes"),
        "step": (float, ex.SUITE_STEP, "lattice step"),
    },
    "certify": {
        **LATTICE,
        "lattice": (_floats, [0.25, 0.25], "lattice steps a b"),
        "u-steps": (int, 64, "angles per ring of the shift grid"),
        "phase-steps": (int, 32, "phase samples"),
        "radial-steps": (int, 4, "rings of the shift grid"),
        "margin": (float, 0.05, "safety margin on the modulus"),
        "tol": (float, 1e-3, "bisection tolerance for delta"),
    },
    "counterexample": {
        "n": (int, 8, "annuli parameter"),
        "radius": (float, 40.0, "largest truncation radius"),
        "radii": (_floats, [], "explicit radii (default radius/4, radius/2, radius)"),
        "step": (float, ex.SUITE_STEP, "lattice step"),
    },
    "molecule-check": {
        **LATTICE,
        "inflate": (float, 1.0, "envelope factor applied to |V_g g|"),
        "phase-jitter": (float, 0.0, "size of random unimodular phases on the molecules"),
    },
    "transfer-check": {
        "size": (int, 24, "matrix size"),
        "trials": (int, 50, "number of seeded matrices"),
        "tolerance": (float, 0.01, "relative failure threshold"),
        "budget": (int, 4, "random restarts of the heuristic"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gdl", description="Gabor deformation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="INI file with option values")
        for name, (_, _, help_) in {**COMMON, **opts}.items():
            nargs = "+" if name in ("lattice", "eps", "radii") else None
            p.add_argument(f"--{name}", dest=name.replace("-", "_"), default=None, nargs=nargs, help=help_)
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and command line; convert and validate."""
    cmd = args.command
    spec = {**COMMON, **OPTIONS[cmd]}
    raw: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError("config", f"file not found: {path}")
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError("config", f"unparseable file: {exc}") from None
        for section in ("common", cmd):
            if cp.has_section(section):
                for key, val in cp.items(section):
                    name = key.replace("_", "-")
                    if name not in spec:
                        raise ConfigError(f"{section}.{key}", "unknown option")
                    raw[name] = val
    for name in spec:
        val = getattr(args, name.replace("-", "_"))
        if val is not None:
            raw[name] = val
    cfg = {"command": cmd}
    for name, (conv, default, _) in spec.items():
        if name in raw:
            try:
                cfg[name] = conv(raw[name])
            except (TypeError, ValueError) as exc:
                raise ConfigError(name, f"cannot parse {raw[name]!r} ({exc})") from None
        else:
            cfg[name] = default
    if not 4 <= cfg["L"] <= MAX_DENSE_L:
        raise ConfigError("L", f"must lie in [4, {MAX_DENSE_L}]")
    if cfg.get("points") and not Path(cfg["points"]).is_file():
        raise ConfigError("points", f"file not found: {cfg['points']}")
    if "lattice" in cfg and len(cfg["lattice"]) != 2:
        raise ConfigError("lattice", "needs two steps a b")
    return cfg


def worker_count() -> int:
    """Worker threads for sweeps: ``GDL_THREADS`` if set, else 1."""
    val = os.environ.get("GDL_THREADS", "1")
    try:
        return max(1, int(val))
    except ValueError:
        raise ConfigError("GDL_THREADS", f"not an integer: {val!r}") from None


def _map(fn: Callable, items) -> list:
    """Ordered map over a thread pool capped by ``GDL_THREADS``."""
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _window(cfg):
    grid = make_grid(cfg["L"])
    name, _, arg = cfg["window"].partition(":")
    if name == "gaussian":
        return gaussian_window(grid)
    if name == "bump":
        return bump_window(grid, float(arg)) if arg else bump_window(grid)
    raise ConfigError("window", f"unknown window {cfg['window']!r}")


def _point_set(cfg, grid) -> PointSet:
    if cfg.get("points"):
        return read_points(cfg["points"])
    a, b = cfg["lattice"]
    if a <= 0 or b <= 0:
        raise ConfigError("lattice", "steps must be positive")
    return tf_lattice(grid, a, b, commensurate=cfg["commensurate"])


def _frame_fields(rep: FrameReport) -> dict:
    return {"A": rep.A, "B": rep.B, "cond": rep.cond, "n_points": rep.n_points, "L": rep.L}


def _check_finite(*vals):
    for v in vals:
        if isinstance(v, float) and math.isnan(v):
            raise FloatingPointError("computation produced NaN")


def run_frame(cfg, riesz: bool = False) -> list[dict]:
    g = _window(cfg)
    S = _point_set(cfg, g.grid)
    rep = (riesz_bounds if riesz else frame_bounds)(g, S)
    _check_finite(rep.A, rep.B)
    return [_frame_fields(rep)]


def run_deform(cfg) -> list[dict]:
    g = _window(cfg)
    fam = cfg["family"]
    if fam == "dilation":
        base = frame_bounds(g, ex.deformed_patch(LinearMap(matrix=np.eye(2)), g.grid, cfg["step"]))

        def one(n):
            T = LinearMap(n=n, matrix=(1 + 1 / n) * np.eye(2))
            return n, frame_bounds(g, ex.deformed_patch(T, g.grid, cfg["step"]))

        series = _map(one, cfg["n"])
        key = "n"
    elif fam == "jitter":
        base, series = ex.jitter_series(g, cfg["eps"], cfg["seed"], cfg["step"])
        key = "eps"
    else:
        raise ConfigError("family", f"unknown family {fam!r}")
    recs = [{"family": fam, key: "base", **_frame_fields(base), "A_base": base.A, "delta_A": 0.0}]
    for p, rep in series:
        recs.append({"family": fam, key: p, **_frame_fields(rep), "A_base": base.A, "delta_A": abs(rep.A - base.A)})
    if cfg["plot"]:
        xs = [p for p, _ in series]
        emit_plot({"A": (xs, [r.A for _, r in series]), "A(Lambda)": (xs, [base.A] * len(xs))},
                  cfg["plot"], xlabel=key, ylabel="lower frame bound", title=f"{fam} sweep")
    return recs


def run_certify(cfg) -> list[dict]:
    g = _window(cfg)
    S = _point_set(cfg, g.grid)
    cert = certify_frame(g, S, margin=cfg["margin"], tol=cfg["tol"], u_steps=cfg["u-steps"],
                         phase_steps=cfg["phase-steps"], radial_steps=cfg["radial-steps"])
    rec = cert.record()
    if cert.verdict == "certified-frame":
        rec["A"] = frame_bounds(g, S).A
    return [rec]


def run_counterexample(cfg) -> list[dict]:
    g = _window(cfg)
    R = cfg["radius"]
    radii = cfg["radii"] or [R / 4, R / 2, R]
    rows = _map(lambda r: ex.annuli_counterexample(g, cfg["n"], [r], cfg["step"])[0], radii)
    recs = [{"n": cfg["n"], "radius": r.radius, "hole_deformed": r.hole_deformed,
             "hole_lattice": r.hole_lattice, "A_deformed": r.A_deformed, "A_lattice": r.A_lattice,
             "empty_odd_annuli": r.empty_odd_annuli} for r in rows]
    if cfg["plot"]:
        a = fit_to_period(cfg["step"], g.grid.P)
        base = ex.plane_lattice(a, R).points
        base = base[np.linalg.norm(base, axis=1) <= R]
        img = AnnuliMap(n=cfg["n"])(base)
        img = img[np.linalg.norm(img, axis=1) <= R]
        emit_plot({"lattice": (base[:, 0], base[:, 1]), "deformed": (img[:, 0], img[:, 1])},
                  cfg["plot"], kind="scatter", title=f"annuli deformation, n={cfg['n']}")
    return recs


def run_molecules(cfg) -> list[dict]:
    g = _window(cfg)
    S = _point_set(cfg, g.grid)
    rng = np.random.default_rng(cfg["seed"])
    members = []
    for lam in S.points:
        f = tf_shift(g.signal, PhasePoint(*lam))
        if cfg["phase-jitter"]:
            ph = np.exp(1j * cfg["phase-jitter"] * rng.uniform(-np.pi, np.pi, g.grid.L))
            f = Signal(g.grid, f.samples * ph)
        members.append(f)
    base = ambiguity_envelope(g)
    c = cfg["inflate"]
    env = Envelope(2, lambda p: c * base(p), base.window)
    chk = check_molecules(MoleculeSet(S, members, g, env))
    return [{"violation": chk.violation, "n_molecules": len(S), "inflate": c}]


def dominated_matrix(n: int, seed: int) -> tuple[np.ndarray, float]:
    """``c I + E`` with ``|E_ij| <= 0.3 exp(-|i-j|)`` and smallest singular value 1."""
    rng = np.random.default_rng(seed)
    i = np.arange(n)
    decay = np.exp(-np.abs(i[:, None] - i[None, :]))
    E = 0.3 * decay * rng.uniform(0, 1, (n, n)) * np.exp(2j * np.pi * rng.uniform(size=(n, n)))
    M = np.eye(n) + E
    s = np.linalg.svd(M, compute_uv=False)[-1]
    A = M / s
    return A, (1.0 + 0.3) / s


def run_transfer(cfg) -> list[dict]:
    n = cfg["size"]
    idx = np.arange(n, dtype=float)[:, None]

    def one(t):
        seed = cfg["seed"] + t
        A, h = dominated_matrix(n, seed)
        theta = Envelope(1, lambda p, h=h: h * np.exp(-np.abs(p[:, 0])), window=n)
        rep = verify_lower_bound_transfer(A, idx, idx, theta, 2, (1, math.inf), cfg["tolerance"],
                                          cfg["budget"], seed)
        return {"trial": t, "trial_seed": seed, **rep.record()}

    return _map(one, range(cfg["trials"]))


RUNNERS = {
    "frame-bounds": run_frame,
    "riesz-bounds": lambda cfg: run_frame(cfg, riesz=True),
    "deform-sweep": run_deform,
    "certify": run_certify,
    "counterexample": run_counterexample,
    "molecule-check": run_molecules,
    "transfer-check": run_transfer,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = _resolve(args)
        worker_count()
        t0 = time.perf_counter()
        results = RUNNERS[cfg["command"]](cfg)
        wall = (time.perf_counter() - t0) * 1e3
    except ConfigError as exc:
        print(f"gdl: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INPUT
    # LinAlgError derives from ValueError, so it must be caught first
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"gdl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PreconditionError, GridError, ValueError) as exc:
        print(f"gdl: precondition violated: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg_for_hash = {k: v for k, v in cfg.items() if k not in ("out", "plot")}
    records = [make_record(cfg["command"], cfg_for_hash, cfg["seed"], wall, **r) for r in results]
    if cfg["out"] == "-":
        write_records(records, sys.stdout)
    else:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            write_records(records, fh)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
