"""Command-line front end: ``renyi-lab <command> [options]``.

Exit codes: 0 success, 1 domain error or failed check, 2 malformed input.
Options can also come from a TOML/JSON file given with --config; explicit
flags win over the file, and the file's ``[<command>]`` table wins over its
top level.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .cylinders import bbl_conditional, bbl_exact_ratio, blocks, cylinder_table_csv, s_sequence
from .expansion import DomainError, Params, convergents, error_bound, expand
from .gauss_kuzmin import InitialDensity, RouteMismatch, gauss_kuzmin_experiment, reports_to_csv
from .grid import GridDensity
from .natext import ext_inverse, ext_iterate, ext_invariance_check, ext_map, ext_measure_rect
from .rscc import ks_against_rho, simulate_chain, simulate_paths
from .suite import DEFAULT_TOLERANCES, run_panel
from .transfer import CENTROID, ENDPOINT, FitRejected, default_truncation, f_from_h, iterates, rate_estimate, u_infinity

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

THREADS_ENV = "RENYI_LAB_THREADS"

COMMON_DEFAULTS = {
    "N": 2,
    "mode": "exact",
    "M": None,
    "nodes": 65,
    "n_max": 12,
    "seed": 0,
    "out": None,
    "threads": None,
    "tail": CENTROID,
}


@dataclass
class RunConfig:
    command: str
    N: int = 2
    mode: str = "exact"
    M: int | None = None
    nodes: int = 65
    n_max: int = 12
    seed: int = 0
    out: str | None = None
    threads: int = 1
    tail: str = CENTROID
    options: dict = field(default_factory=dict)

    def validate(self):
        Params(self.N)
        if self.mode not in ("exact", "float"):
            raise DomainError(f"mode must be exact or float, got {self.mode!r}")
        if self.M is None:
            self.M = default_truncation(self.N)
        if self.M < self.N + 10:
            raise DomainError(f"truncation M={self.M} must be >= N + 10")
        if self.nodes < 3:
            raise DomainError("need at least 3 grid nodes")
        if self.n_max < 1:
            raise DomainError("n_max must be >= 1")
        if self.threads < 1:
            raise DomainError("threads must be >= 1")
        if self.tail not in (CENTROID, ENDPOINT):
            raise DomainError(f"unknown tail rule {self.tail!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("threads")  # results do not depend on it
        return d

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


class InputError(ValueError):
    """Malformed command-line or config input (exit status 2)."""


def parse_number(text: str, mode: str = "exact"):
    """'p/q' or a decimal string; exact Fraction unless mode is 'float'."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse number {text!r}") from exc
    return value if mode == "exact" else float(value)


def parse_block(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError as exc:
        raise InputError(f"cannot parse digit block {text!r}") from exc


def parse_grid(text) -> list:
    """'a:b:k' for k equispaced points, or a comma list."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        if ":" in text:
            a, b, k = text.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(k))]
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse grid {text!r}") from exc


def load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            if path.endswith(".toml"):
                return tomllib.load(fh)
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    merged = dict(COMMON_DEFAULTS)
    if getattr(args, "config", None):
        data = load_config_file(args.config)
        merged.update({k: v for k, v in data.items() if not isinstance(v, dict)})
        merged.update(data.get(args.command, {}))
    merged.update({k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command", "func")})
    if merged.get("threads") is None:
        merged["threads"] = int(os.environ.get(THREADS_ENV, "1"))
    common = {k: merged.pop(k) for k in list(merged) if k in COMMON_DEFAULTS}
    return RunConfig(command=args.command, options=merged, **common).validate()


def header_lines(cfg: RunConfig) -> list:
    return [f"renyi-lab {__version__}", f"config_sha256 {cfg.digest}",
            "config " + json.dumps(cfg.to_dict(), sort_keys=True, default=str)]


def json_document(cfg: RunConfig, result) -> str:
    doc = {"tool": "renyi-lab", "version": __version__, "config_sha256": cfg.digest,
           "config": cfg.to_dict(), "result": result}
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def csv_document(cfg: RunConfig, body: str) -> str:
    return "".join(f"# {line}\n" for line in header_lines(cfg)) + body


def emit(cfg: RunConfig, text: str):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _opt(cfg, key, default=None):
    v = cfg.options.get(key)
    return default if v is None else v


# --- commands ---------------------------------------------------------------

def cmd_expand(cfg: RunConfig) -> int:
    if _opt(cfg, "x") is None:
        raise InputError("--x is required")
    x = parse_number(str(cfg.options["x"]), cfg.mode)
    n = int(_opt(cfg, "n", 10))
    digits = expand(cfg.N, x, n)
    conv = convergents(cfg.N, digits)
    rows = []
    for prev, cur in zip(conv, conv[1:]):
        rows.append({"k": cur.n, "digit": digits[cur.n - 1], "p": cur.p, "q": cur.q,
                     "convergent": f"{cur.p}/{cur.q}", "error_bound": error_bound(cfg.N, cur, prev)})
    if _opt(cfg, "format", "table") == "json":
        emit(cfg, json_document(cfg, {"x": str(x), "digits": list(digits), "truncated": digits.truncated,
                                      "approximate": digits.approximate, "convergents": rows}))
        return 0
    lines = [f"# {line}" for line in header_lines(cfg)]
    lines += [f"# x = {x}  N = {cfg.N}" + ("  (orbit reached 1: truncated)" if digits.truncated else "")
             + ("  (floating point)" if digits.approximate else "")]
    lines.append("digits: " + ",".join(map(str, digits)))
    lines.append(f"{'k':>3} {'digit':>6} {'convergent':>24} {'error_bound':>24}")
    for r in rows:
        lines.append(f"{r['k']:>3} {r['digit']:>6} {r['convergent']:>24} {str(r['error_bound']):>24}")
    emit(cfg, "\n".join(lines) + "\n")
    return 0


def cmd_cylinder(cfg: RunConfig) -> int:
    if _opt(cfg, "block"):
        block_list = [parse_block(cfg.options["block"])]
    else:
        depth = int(_opt(cfg, "depth", 1))
        block_list = blocks(cfg.N, depth, int(_opt(cfg, "max_digit", cfg.N + 4)))
    emit(cfg, csv_document(cfg, cylinder_table_csv(cfg.N, block_list)))
    return 0


def cmd_bbl(cfg: RunConfig) -> int:
    if _opt(cfg, "x") is None:
        raise InputError("--x is required")
    x = parse_number(str(cfg.options["x"]), cfg.mode)
    result = {"x": x}
    if _opt(cfg, "block"):
        block = parse_block(cfg.options["block"])
        s_n = s_sequence(cfg.N, block)[-1]
        result.update(block=list(block), s_n=s_n, exact_ratio=bbl_exact_ratio(cfg.N, block, Fraction(x)))
    elif _opt(cfg, "s") is not None:
        s_n = parse_number(str(cfg.options["s"]), cfg.mode)
        result["s_n"] = s_n
    else:
        raise InputError("give --block or --s")
    result["conditional"] = bbl_conditional(cfg.N, s_n, x)
    emit(cfg, json_document(cfg, result))
    return 0


def cmd_next(cfg: RunConfig) -> int:
    op = _opt(cfg, "op", "map")
    x = parse_number(str(_opt(cfg, "x", "1/2")), cfg.mode)
    y = parse_number(str(_opt(cfg, "y", "1")), cfg.mode)
    if op == "map":
        result = {"point": ext_map(cfg.N, (x, y))}
    elif op == "inverse":
        result = {"point": ext_inverse(cfg.N, (x, y))}
    elif op == "iterate":
        result = {"point": ext_iterate(cfg.N, (x, y), int(_opt(cfg, "n", 1)))}
    elif op == "rect":
        result = {"rect": [x, y], "measure": ext_measure_rect(cfg.N, float(x), float(y))}
    elif op == "invariance":
        rep = ext_invariance_check(cfg.N, (x, y), int(_opt(cfg, "samples", 10**6)), cfg.seed, cfg.threads)
        result = rep.to_dict()
    else:
        raise InputError(f"unknown next op {op!r}")
    if "point" in result:
        result["point"] = list(result["point"])
    emit(cfg, json_document(cfg, result))
    return 0


def density_from_option(cfg: RunConfig, name: str) -> InitialDensity:
    if name == "uniform":
        return InitialDensity.uniform(cfg.nodes)
    if name == "rho":
        return InitialDensity.rho(cfg.N, cfg.nodes)
    if os.path.exists(name):
        with open(name) as fh:
            text = fh.read()
        if name.endswith(".json"):
            g = GridDensity.from_json(text)
            return InitialDensity.tabulated(g.nodes, g.values, name=name)
        rows = [ln.split(",") for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if rows and not _is_number(rows[0][0]):
            rows = rows[1:]  # header
        try:
            table = np.array(rows, dtype=float)
            return InitialDensity.tabulated(table[:, 0], table[:, 1], name=name)
        except (ValueError, IndexError) as exc:
            raise InputError(f"cannot parse density table {name}: {exc}") from exc
    raise InputError(f"unknown density {name!r} (uniform, rho, or a CSV/JSON file)")


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_pf(cfg: RunConfig) -> int:
    op = _opt(cfg, "op", "rate")
    dens = density_from_option(cfg, _opt(cfg, "density", "uniform"))
    f0 = f_from_h(cfg.N, dens.h)
    if op == "iterate":
        g = iterates(cfg.N, f0, cfg.n_max, cfg.M, cfg.tail)[-1]
        emit(cfg, json_document(cfg, {"n": cfg.n_max, "form": "f",
                                      "points": [[float(a), float(b)] for a, b in zip(g.nodes, g.values)]}))
    elif op == "uinf":
        emit(cfg, json_document(cfg, {"u_infinity": u_infinity(cfg.N, f0)}))
    elif op == "rate":
        rep = rate_estimate(cfg.N, f0, max(cfg.n_max, 5), cfg.M, cfg.tail)
        body = "n,norm\n" + "".join(f"{n},{e!r}\n" for n, e in enumerate(rep.norms))
        emit(cfg, csv_document(cfg, body))
        print(f"q_hat={rep.q_hat:.6g} k_hat={rep.k_hat:.6g} window={rep.window} exact={rep.exact}", file=sys.stderr)
    else:
        raise InputError(f"unknown pf op {op!r}")
    return 0


def cmd_chain(cfg: RunConfig) -> int:
    t = float(parse_number(str(_opt(cfg, "t", "1")), "float"))
    n = int(_opt(cfg, "n", 50))
    paths = int(_opt(cfg, "paths", 1))
    if paths == 1:
        states = simulate_chain(cfg.N, t, n, cfg.seed)
        result = {"t0": t, "states": [s.s for s in states]}
    else:
        final = simulate_paths(cfg.N, t, n, paths, cfg.seed, cfg.threads)
        ks = ks_against_rho(cfg.N, final)
        result = {"t0": t, "n": n, "paths": paths, "mean": float(final.mean()),
                  "quantiles": [float(q) for q in np.quantile(final, [0.1, 0.25, 0.5, 0.75, 0.9])],
                  "ks_statistic": float(ks.statistic), "ks_pvalue": float(ks.pvalue)}
    emit(cfg, json_document(cfg, result))
    return 0


def cmd_gauss_kuzmin(cfg: RunConfig) -> int:
    dens = density_from_option(cfg, _opt(cfg, "density", "uniform"))
    grid = parse_grid(_opt(cfg, "x_grid", "0.1:0.9:9"))
    samples = int(_opt(cfg, "samples", 0))
    status = 0
    try:
        reports = gauss_kuzmin_experiment(cfg.N, dens, cfg.n_max, grid, samples, cfg.seed, cfg.M, cfg.tail,
                                          threads=cfg.threads)
    except RouteMismatch as exc:
        print(f"error: route mismatch: {exc}", file=sys.stderr)
        reports, status = exc.reports, 1
    emit(cfg, reports_to_csv(reports, header_lines(cfg)))
    sup = [r.sup_error for r in reports]
    print("sup_error " + " ".join(f"{e:.3e}" for e in sup), file=sys.stderr)
    pos = [(n, e) for n, e in enumerate(sup, start=1) if e > 1e-13]
    if len(pos) >= 3:
        slope = np.polyfit([n for n, _ in pos], np.log([e for _, e in pos]), 1)[0]
        print(f"fitted rate q_hat={np.exp(slope):.6g}", file=sys.stderr)
    return status


def cmd_suite(cfg: RunConfig) -> int:
    Ns = _opt(cfg, "Ns")
    Ns = [int(v) for v in str(Ns).split(",")] if Ns else [cfg.N]
    tol = {k: -1.0 for k in DEFAULT_TOLERANCES} if _opt(cfg, "corrupt_tolerance") else None
    results = run_panel(Ns, seed=cfg.seed, tolerances=tol)
    failed = [r for r in results if not r.passed]
    emit(cfg, json_document(cfg, {"checks": [r.to_dict() for r in results], "all_passed": not failed}))
    for r in failed:
        print(f"FAIL {r.name} N={r.N}: deviation {r.deviation:.3e} > tolerance {r.tolerance:.3e}", file=sys.stderr)
    return 1 if failed else 0


COMMANDS = {
    "expand": cmd_expand,
    "cylinder": cmd_cylinder,
    "bbl": cmd_bbl,
    "next": cmd_next,
    "pf": cmd_pf,
    "chain": cmd_chain,
    "gk": cmd_gauss_kuzmin,
    "suite": cmd_suite,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--N", type=int, dest="N", help="map parameter N >= 2")
    common.add_argument("--mode", choices=["exact", "float"])
    common.add_argument("--M", type=int, dest="M", help="branch truncation for operator sums")
    common.add_argument("--nodes", type=int, help="interpolation nodes")
    common.add_argument("--n-max", type=int, dest="n_max")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", "-o")
    common.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    common.add_argument("--tail", choices=[CENTROID, ENDPOINT])
    common.add_argument("--config", help="TOML or JSON config file")

    parser = argparse.ArgumentParser(prog="renyi-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"renyi-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", parents=[common], help="digits and convergents with error bounds")
    p.add_argument("--x")
    p.add_argument("--n", type=int)
    p.add_argument("--format", choices=["table", "json"])

    p = sub.add_parser("cylinder", parents=[common], help="cylinder endpoints and measures as CSV")
    p.add_argument("--block")
    p.add_argument("--depth", type=int)
    p.add_argument("--max-digit", type=int, dest="max_digit")

    p = sub.add_parser("bbl", parents=[common], help="conditional law of R^n given the first n digits")
    p.add_argument("--x")
    p.add_argument("--block")
    p.add_argument("--s")

    p = sub.add_parser("next", parents=[common], help="natural extension tools")
    p.add_argument("--op", choices=["map", "inverse", "iterate", "rect", "invariance"])
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--n", type=int)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("pf", parents=[common], help="transfer operator tools")
    p.add_argument("--op", choices=["iterate", "rate", "uinf"])
    p.add_argument("--density")

    p = sub.add_parser("chain", parents=[common], help="simulate the s_{n,t} chain")
    p.add_argument("--t")
    p.add_argument("--n", type=int)
    p.add_argument("--paths", type=int)

    p = sub.add_parser("gk", parents=[common], help="Gauss-Kuzmin convergence experiment (CSV)")
    p.add_argument("--density")
    p.add_argument("--x-grid", dest="x_grid")
    p.add_argument("--samples", type=int, help="Monte Carlo orbits (0 = operator route only)")

    p = sub.add_parser("suite", parents=[common], help="run the invariant panel")
    p.add_argument("--Ns", help="comma list of N values, e.g. 2,3,5,10")
    p.add_argument("--corrupt-tolerance", action="store_const", const=True, dest="corrupt_tolerance",
                   help="self-test: set every tolerance negative so all checks fail")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        try:
            cfg = resolve_config(args)
        except TypeError as exc:
            raise InputError(str(exc)) from exc
        return COMMANDS[args.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DomainError, FitRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
