"""Command-line driver: ``smoltt run`` and ``smoltt compare``.

Configuration is a flat ``key = value`` file. ``[section]`` headers are
optional grouping; ``#`` starts a comment. Every key can be overridden by
the command-line flag of the same name (underscores become dashes).
"""
from __future__ import annotations

import argparse
import csv
import datetime
import os
import sys
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .dense import check_cap
from .integrator import SCHEMES, SolverConfig, SolverError, relative_error_vs_analytic, solve
from .optim import OptimConfig
from .tt import TTTensor, tt_add, tt_full, tt_norm, tt_round, tt_scale

__all__ = ["main", "ConfigError", "RunManifest", "read_config", "parse_args", "build_config"]

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
# dense evaluation limit for difference norms and negative counts
_DENSE_LIMIT = 10 ** 7


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("on", "true", "yes", "1"):
        return True
    if v in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {s!r}")


def _optional(conv: Callable) -> Callable:
    def f(s: str):
        return None if s.strip().lower() in ("none", "") else conv(s)
    return f


def _choice(*options) -> Callable:
    def f(s: str):
        v = s.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v
    return f


def _slice(s: str):
    v = s.strip().lower()
    if v in ("none", "full"):
        return v
    return int(v)


@dataclass(frozen=True)
class Key:
    section: str
    conv: Callable
    default: Any
    help: str


KEYS: Dict[str, Key] = {
    "d": Key("grid", int, 2, "number of components"),
    "n": Key("grid", int, 200, "grid points per component"),
    "vmax": Key("grid", float, 40.0, "upper end of each component axis"),
    "tau": Key("time", float, 0.1, "time step"),
    "t_end": Key("time", float, 5.0, "final time (multiple of tau)"),
    "scheme": Key("time", _choice(*SCHEMES), "printed", "predictor-corrector variant"),
    "kernel": Key("kernel", _choice("constant", "ballistic", "zero"), "constant", "coagulation kernel"),
    "source": Key("kernel", _bool, False, "exponential particle source on/off"),
    "initial": Key("kernel", _choice("exponential", "zero"), "exponential", "initial condition"),
    "correction_interval": Key("correction", int, 5, "steps between nonnegativity checks; 0 disables"),
    "final_correction": Key("correction", _optional(_bool), None,
                            "correct once after the last step (default: same as source)"),
    "eps_cross": Key("tolerances", float, 1e-6, "TT-cross tolerance"),
    "eps_round": Key("tolerances", _optional(float), None, "rounding tolerance (default eps_cross / 10)"),
    "max_rank": Key("tolerances", _optional(int), None, "rank cap for rounding"),
    "cross_max_rank": Key("tolerances", int, 64, "rank cap for TT-cross"),
    "seed": Key("tolerances", int, 0, "random seed"),
    "optim_sweeps": Key("optim", int, 4, "extremum search sweeps"),
    "optim_candidates": Key("optim", _optional(int), None, "candidates per mode (default 2 * rank, >= 8)"),
    "dense_scan_below": Key("optim", int, 10 ** 6, "exact scan for tensors up to this many elements"),
    "compare_analytic": Key("output", _bool, False, "report errors against the exact solution (d=2, constant)"),
    "dense_oracle": Key("output", _bool, False, "also run the dense reference solver"),
    "track_negatives": Key("output", _bool, False, "count negative elements every step"),
    "slice": Key("output", _slice, "full", "d=2 slice dump: full, none or a v2 row index"),
    "figures": Key("output", _bool, False, "render PNG figures next to the CSVs"),
    "out": Key("output", str, "out", "output directory"),
}
SECTIONS = sorted({k.section for k in KEYS.values()})


def read_config(path: str) -> Dict[str, Any]:
    """Parse a config file into ``{key: value}``; errors name line and key."""
    values: Dict[str, Any] = {}
    section = None
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                if section not in SECTIONS:
                    raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_").lower()
            if key not in KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            entry = KEYS[key]
            if section is not None and entry.section != section:
                raise ConfigError(
                    f"{path}:{lineno}: key {key!r} belongs in [{entry.section}], not [{section}]"
                )
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                values[key] = entry.conv(val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def _add_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    for key, entry in KEYS.items():
        flag = "--" + key.replace("_", "-")
        if entry.conv is _bool:
            p.add_argument(flag, type=_bool, nargs="?", const=True, metavar="{on,off}",
                           default=argparse.SUPPRESS, help=entry.help)
        else:
            p.add_argument(flag, type=entry.conv, default=argparse.SUPPRESS, help=entry.help)
    p.add_argument("--no-source", dest="source", action="store_false", default=argparse.SUPPRESS,
                   help="same as --source off")


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="smoltt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"smoltt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_flags(sub.add_parser("run", help="solve and write diagnostics"))
    _add_flags(sub.add_parser("compare", help="nonnegative vs baseline solver"))
    return parser.parse_args(argv)


def resolve(args) -> Dict[str, Any]:
    values = {k: entry.default for k, entry in KEYS.items()}
    if args.config:
        values.update(read_config(args.config))
    for k in KEYS:
        if hasattr(args, k):
            values[k] = getattr(args, k)
    return values


def build_config(values: Dict[str, Any]) -> SolverConfig:
    try:
        optim = OptimConfig(
            sweeps=values["optim_sweeps"],
            candidates_per_mode=values["optim_candidates"],
            seed=values["seed"],
            use_dense_scan_below=values["dense_scan_below"],
        )
        return SolverConfig(
            d=values["d"], N=values["n"], v_max=values["vmax"], tau=values["tau"],
            t_end=values["t_end"], kernel=values["kernel"], source_enabled=values["source"],
            correction_interval=values["correction_interval"],
            final_correction=values["final_correction"], initial=values["initial"],
            scheme=values["scheme"], eps_cross=values["eps_cross"],
            eps_round=values["eps_round"], max_rank=values["max_rank"],
            cross_max_rank=values["cross_max_rank"], seed=values["seed"], optim=optim,
        ).resolved()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class RunManifest:
    config: SolverConfig
    values: Dict[str, Any]
    command: str
    version: str
    started: str
    outputs: List[str]

    def write(self, path: str):
        c = self.config
        lines = [
            f"command = {self.command}",
            f"version = {self.version}",
            f"started = {self.started}",
            "",
            "[resolved]",
        ]
        resolved = dict(self.values)
        resolved.update(
            d=c.d, n=c.N, vmax=c.v_max, tau=c.tau, t_end=c.t_end, eps_round=c.eps_round,
            final_correction=c.final_correction,
        )
        for k in KEYS:
            lines.append(f"{k} = {_fmt_value(resolved[k])}")
        lines += [f"n_steps = {c.n_steps}", f"h = {_num(c.grid.h)}", "", "[outputs]"]
        lines += [os.path.basename(o) for o in self.outputs]
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")


def _num(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _fmt_value(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, bool):
        return "on" if x else "off"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


DIAG_COLUMNS = ["step", "time", "total_density", "total_mass", "min_estimate", "max_rank",
                "correction_applied", "correction_shift", "wall_ms"]


def _write_csv(path: str, header: List[str], rows: List[List[Any]]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(x) if not isinstance(x, str) else x for x in r])


def _negative_fraction(n: TTTensor) -> float:
    if n.size > _DENSE_LIMIT:
        return float("nan")
    return float(np.mean(tt_full(n) < 0))


def _run_solver(cfg: SolverConfig, track_negatives: bool):
    negatives: List[float] = []

    def cb(rec, state):
        if track_negatives:
            negatives.append(_negative_fraction(state))

    t0 = time.perf_counter()
    state, diags = solve(cfg, callback=cb)
    return state, diags, negatives, time.perf_counter() - t0


def _diag_rows(diags, negatives, extra_last=None):
    rows = []
    for i, r in enumerate(diags):
        row = [r.step, r.time, r.total_density, r.total_mass, r.min_estimate, r.max_rank,
               r.correction_applied, r.correction_shift, r.wall_time_ms]
        if negatives:
            row.append(negatives[i])
        if extra_last is not None:
            row += list(extra_last) if i == len(diags) - 1 else [None] * len(extra_last)
        rows.append(row)
    return rows


def _write_slice(path: str, state: TTTensor, cfg: SolverConfig, which):
    v = cfg.grid.nodes
    full = tt_full(state)
    rows = []
    if which == "full":
        for i in range(cfg.N):
            for j in range(cfg.N):
                rows.append([v[i], v[j], full[i, j]])
    else:
        if not 0 <= which < cfg.N:
            raise ConfigError(f"slice row {which} outside 0..{cfg.N - 1}")
        for i in range(cfg.N):
            rows.append([v[i], v[which], full[i, which]])
    _write_csv(path, ["v1", "v2", "value"], rows)


def _relative_difference(a: TTTensor, b: TTTensor) -> float:
    """``||a - b||_F / ||b||_F``; evaluated densely when small enough."""
    if all(np.array_equal(x, y) for x, y in zip(a.cores, b.cores)) and a.ranks == b.ranks:
        return 0.0
    if a.size <= _DENSE_LIMIT:
        A, B = tt_full(a), tt_full(b)
        return float(np.linalg.norm(A - B) / np.linalg.norm(B))
    diff = tt_round(tt_add(a, tt_scale(b, -1.0)), 0.0)
    return tt_norm(diff) / tt_norm(b)


def cmd_run(values: Dict[str, Any], cfg: SolverConfig) -> int:
    out = values["out"]
    os.makedirs(out, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    if values["compare_analytic"] and (cfg.d != 2 or cfg.kernel != "constant"):
        raise ConfigError("compare_analytic needs d = 2 and the constant kernel")
    if values["dense_oracle"]:
        check_cap(cfg.grid)

    state, diags, negatives, _ = _run_solver(cfg, values["track_negatives"])
    outputs = []
    header = list(DIAG_COLUMNS)
    if negatives:
        header.append("negative_fraction")
    extra = None
    if values["compare_analytic"]:
        header += ["frob_rel", "density_rel"]
        extra = relative_error_vs_analytic(state, cfg.t_end, cfg.grid)
    path = os.path.join(out, "diagnostics.csv")
    _write_csv(path, header, _diag_rows(diags, negatives, extra))
    outputs.append(path)

    if cfg.d == 2 and values["slice"] != "none":
        path = os.path.join(out, "slice.csv")
        _write_slice(path, state, cfg, values["slice"])
        outputs.append(path)

    if values["dense_oracle"]:
        from .dense import dense_solve
        traj, mom = dense_solve(cfg)
        err = float(np.max(np.abs(tt_full(state) - traj[-1].values)))
        rows = []
        for k in range(1, cfg.n_steps + 1):
            r = diags[k - 1]
            rows.append([k, mom.times[k], mom.density[k], mom.mass[k], r.total_density,
                         r.total_mass, err if k == cfg.n_steps else None])
        path = os.path.join(out, "oracle.csv")
        _write_csv(path, ["step", "time", "dense_density", "dense_mass", "tt_density",
                          "tt_mass", "max_abs_diff"], rows)
        outputs.append(path)

    if values["figures"]:
        from .report import render_run
        outputs += render_run(out, diags, state if cfg.d == 2 else None, cfg, negatives)

    path = os.path.join(out, "manifest.txt")
    outputs.append(path)
    RunManifest(cfg, values, "run", __version__, started, outputs).write(path)
    last = diags[-1]
    msg = (f"t={last.time:g} density={last.total_density:.6e} mass={last.total_mass:.6e} "
           f"max_rank={last.max_rank}")
    if extra is not None:
        msg += f" frob_rel={extra[0]:.4e} density_rel={extra[1]:.4e}"
    print(msg)
    return EXIT_OK


def cmd_compare(values: Dict[str, Any], cfg: SolverConfig) -> int:
    out = values["out"]
    os.makedirs(out, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    base_cfg = cfg.replace(correction_interval=0, final_correction=False)
    ntt, d_ntt, neg_ntt, w_ntt = _run_solver(cfg, values["track_negatives"])
    tt, d_tt, neg_tt, w_tt = _run_solver(base_cfg, values["track_negatives"])
    rel = _relative_difference(ntt, tt)
    r_ntt = max(r.max_rank for r in d_ntt)
    r_tt = max(r.max_rank for r in d_tt)
    outputs = []
    path = os.path.join(out, "comparison.csv")
    _write_csv(path, ["rel_frob_diff", "ntt_max_rank", "tt_max_rank", "ntt_wall_s", "tt_wall_s"],
               [[rel, r_ntt, r_tt, w_ntt, w_tt]])
    outputs.append(path)
    for name, diags, neg in (("diagnostics_ntt.csv", d_ntt, neg_ntt),
                             ("diagnostics_tt.csv", d_tt, neg_tt)):
        header = DIAG_COLUMNS + (["negative_fraction"] if neg else [])
        path = os.path.join(out, name)
        _write_csv(path, header, _diag_rows(diags, neg))
        outputs.append(path)
    if values["figures"]:
        from .report import render_compare
        outputs += render_compare(out, d_ntt, d_tt)
    path = os.path.join(out, "manifest.txt")
    outputs.append(path)
    RunManifest(cfg, values, "compare", __version__, started, outputs).write(path)
    print(f"rel_frob_diff={rel:.4e} ntt_max_rank={r_ntt} tt_max_rank={r_tt} "
          f"ntt_wall_s={w_ntt:.3f} tt_wall_s={w_tt:.3f}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        values = resolve(args)
        cfg = build_config(values)
        if args.command == "run":
            return cmd_run(values, cfg)
        return cmd_compare(values, cfg)
    except (ConfigError, OSError) as exc:
        print(f"smoltt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"smoltt: solver failed at {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, MemoryError, FloatingPointError) as exc:
        print(f"smoltt: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
