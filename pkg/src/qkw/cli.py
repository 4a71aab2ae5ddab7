"""Command-line front end: configuration, dispatch and plot-ready exports."""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import shlex
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Sequence

import numpy as np

from .channel import (BASIS, build_channel, iterate, population_series, sample_trajectory,
                      steady_states)
from .circuit import parse_goods, round_branches
from .economy import EconomyParams, payoff_report
from .equilibrium import (COORDINATES, DEFAULT_FIXED, DEFAULT_PLAYERS, coalition_analysis,
                          equilibria, phase_diagram, unit_grid)
from .strategies import build_strategy
from .verify import run_verification

COMMANDS = ("round-expand", "transition-matrix", "steady-state", "evolve", "payoff", "best-response",
            "phase-diagram", "coalition", "sample", "verify")
FAMILY_THETA = {"classical": 0.0, "quantum": math.pi / 4, "coalition": math.pi / 4}

# dotted config keys -> RunConfig fields
CONFIG_KEYS = {
    "economy.u": "u", "economy.delta": "delta", "economy.c": "c",
    "economy.c1": "c1", "economy.c2": "c2", "economy.c3": "c3",
    "economy.x": "x", "economy.y": "y",
    "strategy.family": "family", "strategy.theta": "theta", "strategy.params": "params",
    "strategy.sA": "s_A", "strategy.sB": "s_B", "strategy.sC": "s_C",
    "strategy.qA": "q_A", "strategy.qB": "q_B", "strategy.qC": "q_C",
    "strategy.p": "p", "strategy.qA'": "q_A'", "strategy.qC'": "q_C'",
    "initial.state": "initial", "initial.goods": "goods",
    "grid.step": "grid_step", "grid.resolution": "resolution",
    "grid.x_range": "x_range", "grid.y_range": "y_range",
    "run.seed": "seed", "run.workers": "workers", "run.steps": "steps", "run.rounds": "rounds",
    "run.horizon": "horizon", "output.path": "output", "output.format": "format",
}


class ConfigError(ValueError):
    """Invalid configuration; reported with exit code 2."""


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _floats(text: str, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None


@dataclass
class RunConfig:
    u: float = 100.0
    delta: float = 0.9
    c: tuple[float, float, float] = (1.0, 4.0, 9.0)
    x: float | None = None
    y: float | None = None
    family: str = "classical"
    coords: dict[str, float] = field(default_factory=dict)
    theta: float | None = None
    initial: str = "231"
    goods: str = "231"
    grid_step: float = 0.01
    resolution: int = 50
    x_range: tuple[float, float] = (0.0, 1.0)
    y_range: tuple[float, float] = (0.0, 1.0)
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    steps: int = 50
    rounds: int = 10_000
    horizon: int = 100
    output: str | None = None
    format: str | None = None

    def economy(self) -> EconomyParams:
        try:
            if self.x is not None or self.y is not None:
                if self.x is None or self.y is None:
                    raise ConfigError("economy.x and economy.y must be given together")
                return EconomyParams.from_coordinates(self.x, self.y, self.u, self.delta, self.c[0])
            return EconomyParams(self.u, self.delta, self.c)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"economy: {exc}") from None

    def strategy_theta(self) -> float:
        return FAMILY_THETA[self.family] if self.theta is None else self.theta

    def point(self) -> dict[str, float]:
        full = dict(DEFAULT_FIXED[self.family])
        full.update(self.coords)
        return full

    def profile(self):
        full = self.point()
        try:
            return build_strategy(self.family, *(full[k] for k in COORDINATES[self.family]),
                                  theta=self.strategy_theta())
        except ValueError as exc:
            raise ConfigError(f"strategy: {exc}") from None

    def start(self) -> np.ndarray:
        return parse_initial(self.initial)

    def digest(self) -> str:
        text = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def validate(self) -> None:
        if self.family not in COORDINATES:
            raise ConfigError(f"strategy.family: unknown family {self.family!r}")
        for k, v in self.coords.items():
            if k not in COORDINATES[self.family]:
                raise ConfigError(f"strategy: {self.family} family has no coordinate {k}")
            if not 0 <= v <= 1:
                raise ConfigError(f"strategy.{k}: must lie in [0, 1]")
        self.economy()
        self.start()
        try:
            parse_goods(self.goods)
        except ValueError as exc:
            raise ConfigError(f"initial.goods: {exc}") from None
        if not 0 < self.grid_step <= 0.5:
            raise ConfigError("grid.step: must lie in (0, 0.5]")
        if self.resolution < 1:
            raise ConfigError("grid.resolution: must be positive")
        for name, (lo, hi) in (("x_range", self.x_range), ("y_range", self.y_range)):
            if not 0 <= lo < hi <= 1:
                raise ConfigError(f"grid.{name}: need 0 <= lo < hi <= 1")
        for name in ("steps", "rounds", "horizon", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be positive")
        if self.format not in (None, "csv", "json"):
            raise ConfigError("output.format: csv or json")


def parse_initial(text: str) -> np.ndarray:
    """A basis label such as ``231`` or a mixture ``211:0.5,231:0.5``."""
    p = np.zeros(8)
    try:
        if ":" not in text:
            p[BASIS.index(text.strip())] = 1.0
        else:
            for part in text.split(","):
                label, weight = part.split(":")
                p[BASIS.index(label.strip())] += float(weight)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"initial.state: cannot parse {text!r} ({exc})") from None
    if np.min(p) < 0 or abs(p.sum() - 1) > 1e-9:
        raise ConfigError("initial.state: weights must be non-negative and sum to 1")
    return p


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines with dotted keys; ``#`` starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"config: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
        values[CONFIG_KEYS[key]] = value
    return values


def _apply(config: RunConfig, values: dict[str, object]) -> None:
    coords = COORDINATES[config.family] if config.family in COORDINATES else ()
    for key, value in values.items():
        if value is None:
            continue
        try:
            if key in ("u", "delta", "x", "y", "theta", "grid_step"):
                setattr(config, key, float(value))
            elif key in ("resolution", "seed", "workers", "steps", "rounds", "horizon"):
                setattr(config, key, int(value))
            elif key == "c":
                c = _floats(value, "economy.c")
                if len(c) != 3:
                    raise ConfigError("economy.c: need three costs")
                config.c = c
            elif key in ("c1", "c2", "c3"):
                c = list(config.c)
                c[int(key[1]) - 1] = float(value)
                config.c = tuple(c)
            elif key in ("x_range", "y_range"):
                r = _floats(value, key)
                if len(r) != 2:
                    raise ConfigError(f"grid.{key}: need lo,hi")
                setattr(config, key, r)
            elif key == "params":
                v = _floats(value, "strategy.params")
                if len(v) > len(coords):
                    raise ConfigError(f"strategy.params: {config.family} takes at most {len(coords)} values")
                config.coords.update(zip(coords, v))
            elif key in ("s_A", "s_B", "s_C", "q_A", "q_B", "q_C", "p", "q_A'", "q_C'"):
                config.coords[key] = float(value)
            elif key in ("family", "initial", "goods", "output", "format"):
                setattr(config, key, str(value))
            else:
                raise ConfigError(f"unknown setting {key}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: invalid value {value!r}") from None


# ---------------------------------------------------------------------------
# serialisation

def fmt_number(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return format(x, ".17g")


def to_json(obj, indent: int = 0) -> str:
    """JSON with every float written to 17 significant digits."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(to_json(v) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist(), indent)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_number(obj) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(str(obj))


@dataclass
class Output:
    kind: str  # "csv" or "json"
    header: list[str] | None = None
    rows: list[list] = field(default_factory=list)
    data: object = None


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_number(v)
    return str(v)


def render(out: Output, meta: dict[str, str]) -> str:
    buf = io.StringIO()
    if out.kind == "csv":
        for k, v in meta.items():
            buf.write(f"# {k}: {v}\n")
        buf.write(",".join(out.header) + "\n")
        for row in out.rows:
            buf.write(",".join(_csv_escape(_cell(v)) for v in row) + "\n")
    else:
        buf.write(to_json({"metadata": meta, "data": out.data}) + "\n")
    return buf.getvalue()


def _csv_escape(text: str) -> str:
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands

def cmd_round_expand(cfg: RunConfig, args) -> Output:
    branches = round_branches(parse_goods(cfg.goods), _single(cfg.profile()))
    return Output("json", data={"goods": cfg.goods, "family": cfg.family, "theta": cfg.strategy_theta(),
                                "branches": [b.to_record() for b in branches]})


def _single(profile):
    if hasattr(profile, "first"):
        raise ConfigError("round-expand needs the classical or quantum family")
    return profile


def cmd_transition_matrix(cfg: RunConfig, args) -> Output:
    ch = build_channel(cfg.profile(), dyads=bool(args.dyads))
    names = BASIS.names()
    if args.dyads or cfg.format == "json":
        data = {"basis": names, "t8": ch.t8.tolist()}
        if ch.t64 is not None:
            data["dyad_index"] = "column 8*x+y holds T(|x><y|), row 8*a+b its |a><b| entry"
            data["t64"] = [[[float(v.real), float(v.imag)] for v in row] for row in ch.t64]
        return Output("json", data=data)
    rows = [[names[i]] + list(ch.t8[i]) for i in range(8)]
    return Output("csv", ["to/from"] + names, rows)


def cmd_steady_state(cfg: RunConfig, args) -> Output:
    ch = build_channel(cfg.profile(), dyads=False)
    dec = steady_states(ch, cfg.start())
    names = BASIS.names()
    return Output("json", data={
        "weights": {names[k]: float(v) for k, v in enumerate(dec.limit) if v > 1e-15},
        "multiplicity": dec.multiplicity,
        "closed_classes": [[names[k] for k in comp] for comp in dec.closed],
        "class_weights": [float(w) for w in dec.weights],
        "stationary": [{names[k]: float(v) for k, v in enumerate(pi) if v > 1e-15}
                       for pi in dec.stationary],
        "residual": dec.residual,
    })


def cmd_evolve(cfg: RunConfig, args) -> Output:
    ch = build_channel(cfg.profile())
    p0 = cfg.start()
    pops = population_series(ch.t8, p0, cfg.steps)
    rho = np.diag(p0).astype(complex) if args.coherent is None else _coherent(args.coherent)
    rows = []
    for t in range(cfg.steps + 1):
        if t:
            rho = iterate(ch, rho, 1)
        diag = pops[t] if args.coherent is None else np.real(np.diag(rho))
        coh = float(np.max(np.abs(rho - np.diag(np.diag(rho)))))
        rows.append([t] + list(diag) + [coh])
    return Output("csv", ["t"] + BASIS.names() + ["max_coherence"], rows)


def _coherent(text: str) -> np.ndarray:
    """Equal superposition of the listed basis states, e.g. ``211+311``."""
    try:
        idx = [BASIS.index(s.strip()) for s in text.split("+")]
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"--coherent: {exc}") from None
    psi = np.zeros(8, dtype=complex)
    psi[idx] = 1 / np.sqrt(len(idx))
    return np.outer(psi, psi.conj())


def cmd_payoff(cfg: RunConfig, args) -> Output:
    params = cfg.economy()
    ch = build_channel(cfg.profile(), dyads=False)
    dec = steady_states(ch, cfg.start())
    report = payoff_report(ch, dec.limit, cfg.start(), params, cfg.horizon)
    agents = [args.agent] if args.agent else list(report.values)
    p12, p23, p31 = report.holdings
    data = [{"agent": a, "V": report.values[a],
             "series": [{"t": t, "pi": float(v)} for t, v in enumerate(report.series[a])],
             "holdings": {"p12": p12, "p23": p23, "p31": p31}, "multiplicity": dec.multiplicity}
            for a in agents]
    return Output("json", data=data if len(data) > 1 else data[0])


def cmd_best_response(cfg: RunConfig, args) -> Output:
    if cfg.family not in DEFAULT_PLAYERS:
        raise ConfigError("best-response needs the classical or quantum family")
    params = cfg.economy()
    grid = unit_grid(cfg.grid_step)
    res = equilibria(cfg.family, params, grid, fixed=cfg.point(), theta=cfg.theta,
                     start=cfg.initial if ":" not in cfg.initial else "231")
    c1, c2 = res.coordinates
    rows = [[g, r1, r2] for g, r1, r2 in zip(grid, res.first_response, res.second_response)]
    out = Output("csv", ["value", f"best_{c1}_given_{c2}", f"best_{c2}_given_{c1}"], rows)
    out.data = [e.to_record() for e in res.equilibria]
    return out


def cmd_phase_diagram(cfg: RunConfig, args) -> Output:
    diagram = phase_diagram(cfg.x_range, cfg.y_range, cfg.resolution, cfg.u, cfg.delta, cfg.c[0],
                            unit_grid(cfg.grid_step))
    rows = [[c.x, c.y, c.classification,
             json.dumps([[float(fmt_number(v)) for v in e.point] for e in c.equilibria])]
            for c in diagram.cells]
    return Output("csv", ["x", "y", "class", "equilibria"], rows)


def cmd_coalition(cfg: RunConfig, args) -> Output:
    params = cfg.economy()
    report = coalition_analysis(params, unit_grid(cfg.grid_step), pair_grid=unit_grid(cfg.grid_step))
    slices = []
    for s in report.slices:
        surface = [{"p": float(s.grid[i]), "q_B": float(s.grid[j]), "q_C'": float(s.grid[k]),
                    "V_B": float(s.values[i, j, k, 1]), "V_C": float(s.values[i, j, k, 2])}
                   for i, j, k in np.ndindex(s.values.shape[:3])]
        slices.append({"q_A'": s.q_a, "joint_argmax": [list(p) for p in s.joint_argmax],
                       "pareto": [list(p) for p in s.pareto], "surface": surface})
    return Output("json", data={
        "baseline": {"point": dict(report.baseline_point), "V": list(report.baseline)},
        "coalition_gain": {fmt_number(k): list(v) for k, v in report.coalition_gain.items()},
        "pair_improvements": {k: [list(p) for p in v] for k, v in report.pair_improvements.items()},
        "slices": slices,
    })


def cmd_sample(cfg: RunConfig, args) -> Output:
    start = cfg.initial if ":" not in cfg.initial else cfg.start()
    traj = sample_trajectory(cfg.profile(), start, cfg.rounds, cfg.seed)
    rows = [[r["round"], r["goods"], r["meeting"], r["flags"], r["after"]] for r in traj.records()]
    return Output("csv", ["round", "goods", "meeting", "flags", "after"], rows)


HANDLERS = {
    "round-expand": cmd_round_expand, "transition-matrix": cmd_transition_matrix,
    "steady-state": cmd_steady_state, "evolve": cmd_evolve, "payoff": cmd_payoff,
    "best-response": cmd_best_response, "phase-diagram": cmd_phase_diagram,
    "coalition": cmd_coalition, "sample": cmd_sample,
}


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="flat key = value file with dotted keys")
    g.add_argument("--u", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--c", help="storage costs c1,c2,c3")
    g.add_argument("--xy", help="cost coordinates x,y (c1 kept fixed)")
    g.add_argument("--family", choices=tuple(COORDINATES))
    g.add_argument("--s", help="classical s_A,s_B,s_C")
    g.add_argument("--q", help="quantum q_A,q_B[,q_C]")
    g.add_argument("--params", help="coordinates in family order (coalition: p,q_A',q_B,q_C')")
    g.add_argument("--theta", type=float)
    g.add_argument("--initial", help="basis label or mixture such as 211:0.5,231:0.5")
    g.add_argument("--seed", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--output", "-o", help="write here (atomically) instead of stdout")
    g.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="qkw", description="Quantum commodity-money economy simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("round-expand", parents=[common], help="branches of one round")
    p.add_argument("--goods")
    p = sub.add_parser("transition-matrix", parents=[common], help="8x8 matrix (and 64x64 dyads)")
    p.add_argument("--dyads", action="store_true", help="include the 64x64 dyad matrix as JSON")
    sub.add_parser("steady-state", parents=[common], help="limit state and closed classes")
    p = sub.add_parser("evolve", parents=[common], help="populations under repeated rounds")
    p.add_argument("--steps", type=int)
    p.add_argument("--coherent", help="start from an equal superposition such as 211+311")
    p = sub.add_parser("payoff", parents=[common], help="steady and finite-horizon payoffs")
    p.add_argument("--agent", choices=("A", "B", "C"))
    p.add_argument("--horizon", type=int)
    for name, text in (("best-response", "best-response curves and equilibria"),
                       ("coalition", "coalition surfaces and comparisons")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--grid-step", type=float)
    p = sub.add_parser("phase-diagram", parents=[common], help="equilibrium class per cost cell")
    p.add_argument("--grid-step", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--x-range")
    p.add_argument("--y-range")
    p = sub.add_parser("sample", parents=[common], help="Monte Carlo trajectory")
    p.add_argument("--rounds", type=int)
    p = sub.add_parser("verify", parents=[common], help="run the acceptance checks")
    p.add_argument("--criteria", help="comma-separated criterion numbers (default: all)")
    return parser


def make_config(args) -> RunConfig:
    cfg = RunConfig()
    file_values = read_config_file(args.config) if args.config else {}
    if "family" in file_values:
        cfg.family = file_values["family"]
    if args.family:
        cfg.family = args.family
    if cfg.family not in COORDINATES:
        raise ConfigError(f"strategy.family: unknown family {cfg.family!r}")
    _apply(cfg, {k: v for k, v in file_values.items() if k != "family"})
    flags = {
        "u": args.u, "delta": args.delta, "c": args.c, "theta": args.theta,
        "initial": args.initial, "seed": args.seed, "workers": args.workers,
        "output": args.output, "format": args.format,
        "goods": getattr(args, "goods", None), "steps": getattr(args, "steps", None),
        "horizon": getattr(args, "horizon", None), "rounds": getattr(args, "rounds", None),
        "grid_step": getattr(args, "grid_step", None), "resolution": getattr(args, "resolution", None),
        "x_range": getattr(args, "x_range", None), "y_range": getattr(args, "y_range", None),
        "params": args.params,
    }
    _apply(cfg, flags)
    if args.xy:
        xy = _floats(args.xy, "--xy")
        if len(xy) != 2:
            raise ConfigError("--xy: need x,y")
        cfg.x, cfg.y = xy
    for flag, family in ((args.s, "classical"), (args.q, "quantum")):
        if flag is None:
            continue
        if cfg.family != family:
            raise ConfigError(f"--{'s' if family == 'classical' else 'q'} needs --family {family}")
        values = _floats(flag, family)
        if len(values) > len(COORDINATES[family]):
            raise ConfigError(f"{family}: too many coordinates")
        cfg.coords.update(zip(COORDINATES[family], values))
    cfg.validate()
    return cfg


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = make_config(args)
    except ConfigError as exc:
        print(f"qkw: invalid configuration: {exc}", file=sys.stderr)
        return 2
    meta = {"tool": f"artifact {_version()}", "config_hash": cfg.digest(),
            "command": shlex.join(["qkw"] + argv)}

    if args.command == "verify":
        try:
            numbers = None if not args.criteria else [int(v) for v in args.criteria.split(",")]
            report = run_verification(numbers)
        except ValueError as exc:
            print(f"qkw: invalid configuration: {exc}", file=sys.stderr)
            return 2
        print("\n".join(report.lines()))
        if cfg.output:
            write_atomic(cfg.output, render(Output("json", data=[c.to_record() for c in report.checks]),
                                            meta))
        return 0 if report.passed else 1

    try:
        out = HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"qkw: invalid configuration: {exc}", file=sys.stderr)
        return 2
    if cfg.format == "csv" and out.kind == "json":
        print(f"qkw: invalid configuration: {args.command} only writes json", file=sys.stderr)
        return 2
    if out.kind == "csv" and out.data is not None:
        meta["equilibria"] = json.dumps(out.data, sort_keys=True)
    if cfg.format == "json" and out.kind == "csv":
        out = Output("json", data={"columns": out.header, "rows": out.rows})
    text = render(out, meta)
    if cfg.output:
        write_atomic(cfg.output, text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
