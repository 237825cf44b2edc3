"""Declarative experiments: JSON spec in, CSV / JSON / PPM out.

Every run is a pure function of its spec, so re-running a spec yields
byte-identical files.  Outputs are written atomically.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .comb import DiamondSpec, comb_csv, comb_run
from .configs import (
    ConfigError,
    DiamondConfigZ2,
    ExplicitConfig,
    PathToOriginConfig,
    TreeToOriginConfig,
    UniformConfig,
)
from .cover import CoverRow, Instance, battery, cover_csv, evaluate
from .engine import check_excursions, check_growth_bounds, run_excursions, run_steps
from .graphs import (
    DEFAULT_WORLD_LIMIT,
    FiniteGraph,
    Lattice,
    LatticeKind,
    complete_graph,
    cycle_graph,
    directed_cycle,
    path_graph,
    star_graph,
    thick_cycle,
)
from .mirror import return_count_experiment, returns_csv
from .render import first_excursion_labels, render_range

EXPERIMENTS = ("range", "excursions", "comb_shape", "returns", "cover")
CONFIG_KINDS = ("uniform", "diamond", "path_to_origin", "tree_to_origin", "explicit")
BUILDERS = {
    "cycle": cycle_graph,
    "directed_cycle": directed_cycle,
    "path": path_graph,
    "complete": complete_graph,
    "star": star_graph,
    "thick_cycle": thick_cycle,
}


class SpecError(ValueError):
    """Invalid experiment spec; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentSpec:
    experiment: str
    name: str = "experiment"
    graph: dict = field(default_factory=lambda: {"kind": "Z2"})
    config: dict = field(default_factory=lambda: {"kind": "uniform"})
    seeds: list[int] = field(default_factory=list)
    origin: object = None
    steps: int = 0
    excursions: int = 0
    checkpoints: list[int] = field(default_factory=list)
    world_limit: int = DEFAULT_WORLD_LIMIT
    outputs: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def canonical(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(name, f"expected an integer, got {value!r}")
    if value < minimum:
        raise SpecError(name, f"must be >= {minimum}")
    return value


def parse_spec(data: dict) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise SpecError("<root>", "spec must be a JSON object")
    known = set(ExperimentSpec.__dataclass_fields__)
    for key in data:
        if key not in known:
            raise SpecError(key, "unknown field")
    if "experiment" not in data:
        raise SpecError("experiment", "missing")
    spec = ExperimentSpec(**data)
    if spec.experiment not in EXPERIMENTS:
        raise SpecError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    if not isinstance(spec.graph, dict) or "kind" not in spec.graph:
        raise SpecError("graph.kind", "missing")
    if not isinstance(spec.config, dict) or spec.config.get("kind") not in CONFIG_KINDS:
        raise SpecError("config.kind", f"must be one of {', '.join(CONFIG_KINDS)}")
    if not isinstance(spec.seeds, list):
        raise SpecError("seeds", "must be a list of integers")
    for s in spec.seeds:
        _int(s, "seeds")
    _int(spec.steps, "steps")
    _int(spec.excursions, "excursions")
    _int(spec.world_limit, "world_limit", 1)
    if not isinstance(spec.checkpoints, list):
        raise SpecError("checkpoints", "must be a list")
    for c in spec.checkpoints:
        _int(c, "checkpoints")
    if not isinstance(spec.outputs, dict):
        raise SpecError("outputs", "must be an object")
    for key in spec.outputs:
        if key not in ("csv", "json", "ppm"):
            raise SpecError(f"outputs.{key}", "unknown output kind")
    needs_seed = spec.config["kind"] == "uniform" and not spec.graph.get("battery")
    if (needs_seed or spec.experiment in ("comb_shape", "returns")) and not spec.seeds:
        raise SpecError("seeds", "explicit seeds are required")
    if spec.experiment in ("range", "returns") and spec.steps < 1:
        raise SpecError("steps", "must be >= 1")
    if spec.experiment == "excursions" and spec.excursions < 1:
        raise SpecError("excursions", "must be >= 1")
    if spec.experiment == "comb_shape":
        _int(spec.params.get("n", 0), "params.n", 2)
    graph = make_graph(spec)
    if graph is None and spec.experiment != "cover":
        raise SpecError("graph.battery", "only the cover experiment runs a battery")
    if spec.experiment in ("comb_shape",) and (graph.is_finite or graph.kind != LatticeKind.COMB):
        raise SpecError("graph.kind", "comb_shape needs COMB")
    if spec.experiment == "returns" and (graph.is_finite or graph.kind not in (LatticeKind.MANHATTAN, LatticeKind.FLATTICE)):
        raise SpecError("graph.kind", "returns needs MANHATTAN or FLATTICE")
    return spec


def load_spec(path: str | Path) -> ExperimentSpec:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecError("--spec", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SpecError("--spec", f"invalid JSON: {exc}") from None
    return parse_spec(data)


def make_graph(spec: ExperimentSpec):
    g = spec.graph
    kind = str(g["kind"]).upper().replace("-", "")
    if kind == "FINITE":
        if g.get("battery"):
            return None
        if "path" in g:
            try:
                return FiniteGraph.load(g["path"])
            except (OSError, ValueError) as exc:
                raise SpecError("graph.path", str(exc)) from None
        builder = g.get("builder")
        if builder not in BUILDERS:
            raise SpecError("graph.builder", f"must be one of {', '.join(BUILDERS)}")
        try:
            return BUILDERS[builder](*g.get("args", []))
        except (TypeError, ValueError) as exc:
            raise SpecError("graph.args", str(exc)) from None
    if kind not in LatticeKind.__members__:
        raise SpecError("graph.kind", f"unknown kind {g['kind']!r}")
    return Lattice(LatticeKind[kind], spec.world_limit)


def make_config(spec: ExperimentSpec, graph, seed: int | None, origin):
    c = spec.config
    kind = c["kind"]
    try:
        if kind == "uniform":
            return UniformConfig(graph, seed)
        if kind == "diamond":
            return DiamondConfigZ2(graph, origin)
        if kind == "path_to_origin":
            aux = c.get("aux_seed", seed if seed is not None else 0)
            return PathToOriginConfig(graph, origin, c.get("direction", "E"), aux)
        if kind == "tree_to_origin":
            return TreeToOriginConfig(graph, origin)
        return ExplicitConfig.load(graph, c["path"])
    except KeyError as exc:
        raise SpecError(f"config.{exc.args[0]}", "missing") from None
    except ConfigError as exc:
        raise SpecError("config.kind", str(exc)) from None


def _origin(spec: ExperimentSpec, graph):
    if graph is None:
        return None
    if spec.origin is None:
        return 0 if graph.is_finite else (0, 0)
    return spec.origin if graph.is_finite else tuple(spec.origin)


# ------------------------------------------------------------------- fitting


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r2: float


def fit_exponent(series) -> Fit:
    """Least-squares slope of log(value) against log(t)."""
    pts = [(float(t), float(v)) for t, v in series]
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(t <= 0 or v <= 0 for t, v in pts):
        raise ValueError("all t and values must be positive")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, intercept])
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(((y - pred) ** 2).sum()) / ss_tot
    return Fit(float(slope), float(intercept), r2)


# ------------------------------------------------------------------- running


@dataclass
class Report:
    spec: ExperimentSpec
    csv: str
    rows: list[dict]
    violations: list[str] = field(default_factory=list)
    ppm: bytes | None = None

    def json(self) -> str:
        return json.dumps({
            "experiment": self.spec.experiment,
            "name": self.spec.name,
            "spec_hash": self.spec.digest(),
            "version": __version__,
            "rows": self.rows,
            "violations": self.violations,
        }, indent=1, sort_keys=True) + "\n"


def _csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    out = csv.DictWriter(buf, columns, lineterminator="\n")
    out.writeheader()
    out.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _run_range(spec: ExperimentSpec, graph, origin) -> Report:
    rows, bad = [], []
    for seed in spec.seeds or [None]:
        cfg = make_config(spec, graph, seed, origin)
        summary = run_steps(graph, cfg, origin, spec.steps, spec.checkpoints)
        for cp in summary.checkpoints + [summary.final]:
            if cp is summary.final and summary.checkpoints and summary.checkpoints[-1].t == cp.t:
                continue
            issues = check_growth_bounds(graph, origin, cp)
            bad += [f"seed {seed}: {m}" for m in issues]
            ratio = cp.range_size / cp.t ** (2 / 3) if cp.t else 0.0
            rows.append({"seed": seed, "t": cp.t, "u_t_o": cp.u_origin, "range_size": cp.range_size,
                         "range_ratio": _fmt(ratio), "bounds_ok": int(not issues)})
    cols = ["seed", "t", "u_t_o", "range_size", "range_ratio", "bounds_ok"]
    return Report(spec, _csv(cols, rows), rows, bad)


def _run_excursions(spec: ExperimentSpec, graph, origin) -> Report:
    rows, bad, ppm = [], [], None
    budget = spec.steps or 10**6
    for k, seed in enumerate(spec.seeds or [None]):
        cfg = make_config(spec, graph, seed, origin)
        log = run_excursions(graph, cfg, origin, spec.excursions, budget)
        bad += [f"seed {seed}: {m}" for m in check_excursions(graph, log)]
        for n in range(1, len(log.T)):
            rows.append({"seed": seed, "n": n, "T": log.T[n], "size_A": len(log.A[n]), "incomplete": 0})
        if log.incomplete:
            rows.append({"seed": seed, "n": len(log.T), "T": "", "size_A": "", "incomplete": 1})
        if k == 0 and "ppm" in spec.outputs and not graph.is_finite:
            ppm = render_range(first_excursion_labels(log))
    cols = ["seed", "n", "T", "size_A", "incomplete"]
    return Report(spec, _csv(cols, rows), rows, bad, ppm)


def _run_comb(spec: ExperimentSpec, graph, origin) -> Report:
    p = spec.params
    ds = DiamondSpec(int(p["n"]), float(p.get("c", 4.0)))
    runs = [comb_run(s, ds, int(p.get("multiplier", 6)), spec.world_limit) for s in spec.seeds]
    rows = [{"seed": r.seed, "n": ds.n, "c": ds.c, "t": r.t, "inside_ok": int(r.verdict.inside_ok),
             "outside_ok": int(r.verdict.outside_ok), "range_size": r.range_size} for r in runs]
    return Report(spec, comb_csv(runs), rows)


def _run_returns(spec: ExperimentSpec, graph, origin) -> Report:
    recs = return_count_experiment(graph.kind, spec.seeds, spec.steps, spec.checkpoints, spec.world_limit)
    rows = [{"seed": r.seed, "lattice": r.lattice, "t": r.t, "u_t_o": r.u_origin,
             "range_size": r.range_size, "aborted": int(r.aborted)} for r in recs]
    return Report(spec, returns_csv(recs), rows)


def _run_cover(spec: ExperimentSpec, graph, origin) -> Report:
    if spec.graph.get("battery"):
        insts = battery(int(spec.params.get("count", 200)), int(spec.params.get("seed", 0)))
    else:
        seeds = spec.seeds or [None]
        insts = [Instance(f"{graph.name or 'graph'}-{s}", graph, make_config(spec, graph, s, origin), origin)
                 for s in seeds]
    out: list[CoverRow] = [evaluate(i) for i in insts]
    bad = []
    for r in out:
        # only the cover-time theorem is a monitored invariant
        if not (r.checks["vertex_bound"] and r.checks["edge_bound"]):
            bad.append(f"{r.graph_id}: cover bound violated")
    rows = [{"graph_id": r.graph_id, "n": r.n, "m_directed": r.m_directed, "D": r.D, "t_vertex": r.t_vertex,
             "t_edge": r.t_edge, "K": float(f"{r.K:.10g}"), "checks": r.checks} for r in out]
    return Report(spec, cover_csv(out), rows, bad)


_RUNNERS = {
    "range": _run_range,
    "excursions": _run_excursions,
    "comb_shape": _run_comb,
    "returns": _run_returns,
    "cover": _run_cover,
}


def run_experiment(spec: ExperimentSpec) -> Report:
    graph = make_graph(spec)
    origin = _origin(spec, graph)
    return _RUNNERS[spec.experiment](spec, graph, origin)


def atomic_write(path: str | Path, data: str | bytes) -> None:
    path = Path(path)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: Report, out_dir: str | Path | None = None) -> list[Path]:
    """Write the outputs named in the spec (or ``<out_dir>/<name>.*``)."""
    spec = report.spec
    targets = dict(spec.outputs)
    if out_dir is not None:
        base = Path(out_dir)
        targets = {k: str(base / f"{spec.name}.{k}") for k in ("csv", "json")}
        if report.ppm is not None:
            targets["ppm"] = str(base / f"{spec.name}.ppm")
    written = []
    for kind, dest in sorted(targets.items()):
        payload = {"csv": report.csv, "json": report.json(), "ppm": report.ppm}[kind]
        if payload is None:
            continue
        atomic_write(dest, payload)
        written.append(Path(dest))
    return written

