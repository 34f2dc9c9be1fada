"""Command-line front end.

    qdchain <validate|spectrum|verify|limit|solve> --config FILE [--out DIR] [--seed N]

The configuration is one JSON object.  Reports are JSON, tables are CSV;
every float is written with 17 significant digits so that reruns with the
same configuration and seed produce byte-identical files.  Without ``--out``
the primary output goes to stdout.  Errors are written to stderr as JSON.

Exit status: 0 success, 1 invalid parameters or input, 2 nonconvergence.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import continuum, darboux, solver, tridiag
from .chain_r2 import ChainParams, validate
from .errors import NotConverged, ParameterError, QDChainError, SchemaError
from .lattice import LatticeFunction, LatticeWindow

COMMANDS = ("validate", "spectrum", "verify", "limit", "solve")

_TOP_KEYS = {"r", "s", "q", "alpha", "phi", "kappa", "epsilon", "window", "tol", "levels",
             "hsweep", "strategy", "seed", "completeness_levels", "limit", "experiment"}
_LIMIT_KEYS = {"function", "x_min", "x_max", "points", "j", "centered"}
_EXPERIMENT_KEYS = {"x_max", "points", "half_width", "levels"}


@dataclass
class RunConfig:
    params: Optional[ChainParams]
    alphas: tuple
    window: LatticeWindow
    tol: float = 1e-10
    levels: int = 8
    hsweep: tuple = ()
    strategy: str = "from-r2-interlace"
    seed: int = 0
    completeness_levels: int = 60
    limit: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _number(doc, key, path, kind=float, required=False, default=None):
    if key not in doc:
        if required:
            raise SchemaError("missing required key", f"{path}{key}")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise SchemaError(f"expected a number, got {type(val).__name__}", f"{path}{key}")
    if kind is int:
        if isinstance(val, float) and not val.is_integer():
            raise SchemaError("expected an integer", f"{path}{key}")
        return int(val)
    if not math.isfinite(val):
        raise SchemaError("expected a finite number", f"{path}{key}")
    return float(val)


def _number_list(doc, key, path):
    val = doc.get(key, [])
    if not isinstance(val, list):
        raise SchemaError("expected a list", f"{path}{key}")
    return tuple(_number({"v": x}, "v", f"{path}{key}[{i}].") for i, x in enumerate(val))


def _sub(doc, key, allowed):
    sub = doc.get(key, {})
    if not isinstance(sub, dict):
        raise SchemaError("expected an object", key)
    extra = sorted(set(sub) - allowed)
    if extra:
        raise SchemaError("unknown key", f"{key}.{extra[0]}")
    return sub


def parse_config(text: str, require_q: bool = True) -> RunConfig:
    """Parse and validate a JSON configuration document.

    Unknown keys raise :class:`SchemaError` with the key path; parameter
    constraints (``0 < q < 1``, even ``r``, ...) raise :class:`ParameterError`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("configuration must be a JSON object")
    extra = sorted(set(doc) - _TOP_KEYS)
    if extra:
        raise SchemaError("unknown key", extra[0])

    r = _number(doc, "r", "", int, required=True)
    s = _number(doc, "s", "", int, default=r // 2 if r else None)
    alphas = _number_list(doc, "alpha", "")
    if not alphas:
        raise SchemaError("missing required key", "alpha")
    q = _number(doc, "q", "", required=require_q)
    phi = _number(doc, "phi", "", default=0.5)
    kappa = _number(doc, "kappa", "")
    epsilon = _number(doc, "epsilon", "", int, default=-1)

    win = _sub(doc, "window", {"nmin", "nmax"})
    nmin = _number(win, "nmin", "window.", int, default=-60)
    nmax = _number(win, "nmax", "window.", int, default=60)
    try:
        window = LatticeWindow(nmin, nmax)
    except ValueError as exc:
        raise ParameterError(str(exc)) from exc

    params = None
    if q is not None:
        params = ChainParams(r=r, s=s, q=q, alphas=alphas, phi=phi, kappa=kappa,
                             epsilon=epsilon)
    elif r % 2 or r <= 0 or s != r // 2:
        raise ParameterError("r must be a positive even integer with s = r/2")

    tol = _number(doc, "tol", "", default=1e-10)
    if not tol > 0:
        raise ParameterError("tol must be positive")
    levels = _number(doc, "levels", "", int, default=8)
    if levels < 1:
        raise ParameterError("levels must be at least 1")
    hsweep = _number_list(doc, "hsweep", "")
    if any(h <= 0 for h in hsweep):
        raise ParameterError("every h in hsweep must be positive")
    strategy = doc.get("strategy", "from-r2-interlace")
    if strategy not in ("from-r2-interlace", "continuation-in-q"):
        raise ParameterError(f"unknown strategy {strategy!r}")
    seed = _number(doc, "seed", "", int, default=0)
    clevels = _number(doc, "completeness_levels", "", int, default=60)

    lim = _sub(doc, "limit", _LIMIT_KEYS)
    limit = {
        "function": lim.get("function", "gauss"),
        "x_min": _number(lim, "x_min", "limit.", default=None),
        "x_max": _number(lim, "x_max", "limit.", default=None),
        "points": _number(lim, "points", "limit.", int, default=21),
        "j": _number(lim, "j", "limit.", int, default=1),
        "centered": bool(lim.get("centered", True)),
    }
    if limit["function"] not in continuum.TEST_FUNCTIONS:
        raise ParameterError(f"unknown test function {limit['function']!r}; choose from "
                             f"{sorted(continuum.TEST_FUNCTIONS)}")
    exp = _sub(doc, "experiment", _EXPERIMENT_KEYS)
    experiment = {
        "x_max": _number(exp, "x_max", "experiment.", default=2.0),
        "points": _number(exp, "points", "experiment.", int, default=41),
        "half_width": _number(exp, "half_width", "experiment.", default=10.0),
        "levels": _number(exp, "levels", "experiment.", int, default=5),
    }
    return RunConfig(params, alphas, window, tol, levels, hsweep, strategy, seed, clevels,
                     limit, experiment, doc)


# ----------------------------------------------------------------- output


def fmt(x) -> str:
    """17 significant digits; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON with fixed-precision floats and sorted keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (bool, np.bool_, int, float, np.integer, np.floating)):
        return fmt(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}"
                 for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _params_echo(cfg: RunConfig) -> dict:
    p = cfg.params
    out = {"r": p.r if p else int(cfg.raw["r"]), "alpha": list(cfg.alphas),
           "window": {"nmin": cfg.window.n_min, "nmax": cfg.window.n_max},
           "tol": cfg.tol, "levels": cfg.levels, "seed": cfg.seed}
    if p is not None:
        out.update(s=p.s, q=p.q, phi=p.phi, kappa=p.kappa, epsilon=p.epsilon)
    return out


class _Clock:
    """Wall-clock timings, reported only on request so reports stay reproducible."""

    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.marks = {}

    def run(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.marks[name] = 1e3 * (time.perf_counter() - t0)
        return out

    def report(self):
        return dict(self.marks) if self.enabled else None


# ---------------------------------------------------------------- commands


def _require_params(cfg: RunConfig) -> ChainParams:
    if cfg.params is None:
        raise SchemaError("missing required key", "q")
    return cfg.params


def _chain(cfg: RunConfig, clock: _Clock):
    """Closed-form chain for r = 2, solver output otherwise."""
    params = _require_params(cfg)
    if params.r == 2:
        return clock.run("build", darboux.DarbouxChain.from_params, params, cfg.window), None
    u, rep = clock.run("solve", _solve_general, cfg)
    return u.chain(params), rep


def _solve_general(cfg: RunConfig):
    params = cfg.params
    if cfg.strategy == "continuation-in-q":
        path = solver.continuation_path(params, cfg.window, tol=cfg.tol)
        _, u, rep = path[-1]
        return u, rep
    return solver.solve_chain(params, cfg.window, cfg.tol)


def cmd_validate(cfg: RunConfig, clock: _Clock) -> dict:
    params = _require_params(cfg)
    rep = clock.run("validate", validate, params, cfg.window)
    out = rep.to_dict()
    out["params"] = _params_echo(cfg)
    out["timings_ms"] = clock.report()
    return {"report.json": to_json(out) + "\n"}


def cmd_spectrum(cfg: RunConfig, clock: _Clock) -> dict:
    params = _require_params(cfg)
    K = cfg.levels - 1
    rows = []
    for j in range(1, params.r + 1):
        table = darboux.eigenvalue_table(params, j, K)
        rows.extend((lam, j, k) for k, lam in enumerate(table.levels))
    rows.sort(key=lambda row: (row[1], row[2]))
    files = {"spectrum.csv": to_csv(["lambda", "j", "k"], rows)}
    chain, _ = _chain(cfg, clock)
    basis = clock.run("eigenbasis", darboux.eigenbasis, chain, 1, K)
    sites = cfg.window.sites
    header = ["n"] + [f"psi_1_{k}" for k in range(K + 1)]
    psi_rows = [[int(n)] + [p.psi.values[i] for p in basis] for i, n in enumerate(sites)]
    files["eigenfunctions.csv"] = to_csv(header, psi_rows)
    return files


def cmd_verify(cfg: RunConfig, clock: _Clock) -> dict:
    params = _require_params(cfg)
    out = {"params": _params_echo(cfg)}
    if params.r == 2:
        rep = clock.run("validate", validate, params, cfg.window)
        vd = rep.to_dict()
        out["residuals"] = vd["residuals"]
        out["kappa"] = vd["kappa"]
    chain, srep = _chain(cfg, clock)
    if srep is not None:
        out["solver"] = srep.to_dict()
        out["kappa"] = None  # the kappa window belongs to the r = 2 closed form
    K = cfg.levels - 1
    spectra = {}
    worst = 0.0
    for j in range(1, params.r + 1):
        pred = darboux.eigenvalue_table(params, j, K)
        orc = clock.run(f"oracle_j{j}", tridiag.oracle_spectrum, chain.L(j), K + 1)
        cmp = tridiag.compare_spectra(pred, orc)
        worst = max(worst, cmp.max_abs_diff)
        spectra[f"j{j}"] = {"predicted": list(pred.levels), "oracle": list(orc),
                            "max_abs_diff": cmp.max_abs_diff}
    out["spectrum"] = dict(spectra["j1"], by_j=spectra, max_abs_diff_all=worst)

    basis = clock.run("eigenbasis", darboux.eigenbasis, chain, 1, K)
    ladder = []
    for i in range(1, params.r + 1):
        src = darboux.eigenbasis(chain, i, K)
        A = chain.A(i)
        for p in src:
            img = darboux.ladder(p.psi, A)
            ladder.append(abs(img.inner(img) - (p.lam + chain.alpha(i))))
    out["ladder_norm_defect"] = max(ladder)
    G = darboux.gram_matrix(basis)
    out["gram_defect"] = float(np.abs(G - np.eye(len(basis))).max())
    L1 = chain.L(1)
    out["eigen_residual"] = max(darboux.eigen_residual(L1, p) for p in basis)
    v0 = tridiag.eigenvector(L1, basis[0].lam, seed=cfg.seed)
    out["ground_state_oracle_diff"] = float(np.linalg.norm(v0.values - basis[0].psi.values))

    delta = LatticeFunction.delta(cfg.window, 0) if 0 in range(
        cfg.window.n_min, cfg.window.n_max + 1) else None
    if delta is not None:
        try:
            big = clock.run("completeness", darboux.eigenbasis, chain, 1, cfg.completeness_levels)
            out["completeness_defect"] = darboux.completeness_defect(big, delta)
            out["completeness_levels"] = cfg.completeness_levels
        except QDChainError as exc:
            out["completeness_defect"] = None
            out["completeness_error"] = exc.to_dict()
    out["checks"] = {
        "spectrum_within_1e-8": worst <= 1e-8,
        "completeness_within_1e-6": (out.get("completeness_defect") is not None
                                     and out["completeness_defect"] <= 1e-6),
    }
    out["timings_ms"] = clock.report()
    return {"report.json": to_json(out) + "\n"}


def cmd_limit(cfg: RunConfig, clock: _Clock) -> dict:
    if len(cfg.alphas) != 2:
        raise ParameterError("the continuum limit needs r = 2 and two alphas")
    lim = cfg.limit
    symmetric = cfg.alphas[0] == cfg.alphas[1]
    lo = lim["x_min"] if lim["x_min"] is not None else (-1.0 if symmetric else 0.5)
    hi = lim["x_max"] if lim["x_max"] is not None else (1.0 if symmetric else 2.0)
    grid = np.linspace(lo, hi, lim["points"])
    hs = cfg.hsweep or (0.2, 0.1, 0.05, 0.025)
    f, f2 = continuum.TEST_FUNCTIONS[lim["function"]]
    rows = clock.run("sweep", continuum.h_sweep, cfg.alphas, hs, grid, f, f2, lim["j"],
                     lim["centered"])
    return {"limit.csv": to_csv(["h", "q", "error", "error_over_h"], rows)}


def cmd_solve(cfg: RunConfig, clock: _Clock) -> dict:
    params = _require_params(cfg)
    u, rep = clock.run("solve", _solve_general, cfg)
    chain = u.chain(params)
    K = cfg.levels - 1
    spectra = {}
    for j in range(1, params.r + 1):
        pred = darboux.eigenvalue_table(params, j, K)
        orc = tridiag.oracle_spectrum(chain.L(j), K + 1)
        spectra[f"j{j}"] = {"predicted": list(pred.levels), "oracle": list(orc),
                            "max_abs_diff": tridiag.compare_spectra(pred, orc).max_abs_diff}
    out = {"params": _params_echo(cfg), "solver": rep.to_dict(), "spectrum": spectra,
           "strategy": cfg.strategy}
    files = {}
    if cfg.hsweep:
        if params.r != 6 or tuple(params.alphas[:3]) != tuple(params.alphas[3:]):
            raise ParameterError("the h-sweep experiment needs r = 6 with alpha_{j+3} = alpha_j")
        e = cfg.experiment
        exp = clock.run("experiment", solver.period6_experiment, params.alphas[:3], cfg.hsweep,
                        e["x_max"], e["points"], e["half_width"], e["levels"], cfg.tol)
        out["experiment"] = exp.to_dict()
        files["profiles.csv"] = to_csv(["h", "j", "x", "V"], exp.profile_rows())
    out["timings_ms"] = clock.report()
    rows = []
    for jj in range(u.r):
        for i, n in enumerate(u.window.sites):
            rows.append((jj + 1, int(n), u.a[jj, i], u.b[jj, i]))
    files = {"report.json": to_json(out) + "\n",
             "coefficients.csv": to_csv(["j", "n", "a", "b"], rows), **files}
    return files


HANDLERS = {"validate": cmd_validate, "spectrum": cmd_spectrum, "verify": cmd_verify,
            "limit": cmd_limit, "solve": cmd_solve}


def run(command: str, cfg: RunConfig, timings: bool = False) -> dict:
    """Execute ``command``; returns ``{file name: content}``."""
    if command not in HANDLERS:
        raise ParameterError(f"unknown command {command!r}")
    return HANDLERS[command](cfg, _Clock(timings))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qdchain", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", help="output directory (default: primary output to stdout)")
    ap.add_argument("--seed", type=int, help="overrides the configured random seed")
    ap.add_argument("--levels", type=int, help="overrides the configured level count")
    ap.add_argument("--timings", action="store_true",
                    help="include wall-clock timings (reports are then not reproducible)")
    return ap


def _fail(exc: Exception) -> int:
    payload = exc.to_dict() if isinstance(exc, QDChainError) else {
        "error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(to_json(payload) + "\n")
    return 2 if isinstance(exc, NotConverged) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text, require_q=args.command != "limit")
        if args.seed is not None:
            cfg.seed = args.seed
        if args.levels is not None:
            if args.levels < 1:
                raise ParameterError("levels must be at least 1")
            cfg.levels = args.levels
        files = run(args.command, cfg, args.timings)
    except (QDChainError, ValueError, OSError) as exc:
        return _fail(exc)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, content in files.items():
            with open(out / name, "w", newline="\n") as fh:
                fh.write(content)
    else:
        sys.stdout.write(next(iter(files.values())))
    return 0


if __name__ == "__main__":
    sys.exit(main())
