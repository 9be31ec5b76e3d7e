"""Command-line front end.

    python3 -m lyapform analyze --config run.json --out results/

Every command materializes its full configuration (defaults included) as
``effective_config.json`` in the output directory.  Outputs contain no
timestamps, so a config plus seed reproduces them byte for byte.

Exit codes: 0 ok, 2 configuration error, 3 condition fails, 4 synthesis
infeasible, 5 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import render
from .asymptotic import check_all, estimate_asymptotic_cycle
from .cubical_map import Grid, build_flow_graph, write_flow_graph
from .recurrence import xi_recurrent_cells
from .synthesis import synthesize, verify_lyapunov
from .torus_flow import PRESETS, ClosedOneForm, ConfigurationError, TorusFlowSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITION = 3
EXIT_INFEASIBLE = 4
EXIT_VERIFY = 5

CONDITIONS = ("II", "III", "IV")


@dataclass
class RunConfig:
    flow: object = "linear"
    form: dict = field(default_factory=lambda: {"periods": [-1.0, 0.0], "potential": []})
    grid: object = 32
    tau: float = 2.0
    padding: int = 1
    samples_per_cell: int = 1
    step: float | None = None
    theta: float | None = None
    epsilon: float | None = None
    max_frequency: int | None = None
    conley: str = "auto"
    margin: float = 1e-6
    n_samples: int = 10000
    lambda2_bound: float | None = None
    condition: str | None = None
    t_total: float = 1000.0
    trajectory_step: float = 0.01
    x0: list | None = None
    n_random_x0: int = 4
    selftest_instances: int = 200
    seed: int = 0
    threads: int = 1

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        cfg = cls(**obj)
        cfg.validate()
        return cfg

    def validate(self):
        if not (isinstance(self.tau, (int, float)) and self.tau > 1):
            raise ConfigurationError(f"tau must be a number > 1, got {self.tau!r}")
        for name in ("padding", "samples_per_cell", "n_samples", "threads", "selftest_instances"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.condition is not None and self.condition not in CONDITIONS:
            raise ConfigurationError(f"condition must be one of {CONDITIONS}")
        if self.conley not in ("auto", "always", "never"):
            raise ConfigurationError("conley must be auto, always or never")
        if self.theta is not None and self.theta < 0:
            raise ConfigurationError("theta must be >= 0")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Resolved:
    config: RunConfig
    spec: TorusFlowSpec
    form: ClosedOneForm
    grid: Grid


def _load_json(path: Path):
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _resolve_flow(ref, base: Path) -> TorusFlowSpec:
    if isinstance(ref, str):
        if ref in PRESETS:
            return PRESETS[ref]()
        return _resolve_flow(_load_json(base / ref), base)
    if isinstance(ref, dict) and "preset" in ref:
        name = ref["preset"]
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
        return PRESETS[name](**ref.get("params", {}))
    if isinstance(ref, dict):
        return TorusFlowSpec.from_json(ref)
    raise ConfigurationError("flow must be a preset name, a file path or an inline flow object")


def resolve(cfg: RunConfig, base: Path = Path(".")) -> Resolved:
    try:
        spec = _resolve_flow(cfg.flow, base)
        form = ClosedOneForm.from_json(cfg.form)
        res = (cfg.grid,) * spec.dim if isinstance(cfg.grid, int) else tuple(cfg.grid)
        grid = Grid(res)
    except ConfigurationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid flow/form/grid: {exc}") from exc
    if form.dim != spec.dim or grid.dim != spec.dim:
        raise ConfigurationError(f"dimension mismatch: flow {spec.dim}, form {form.dim}, grid {grid.dim}")
    return Resolved(cfg, spec, form, grid)


# -- output helpers ----------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_json(path: Path, obj):
    text = json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


def _build_graph(r: Resolved):
    c = r.config
    return build_flow_graph(r.spec, r.form, r.grid, c.tau, c.samples_per_cell, c.padding,
                            c.step, threads=c.threads)


def _analysis(r: Resolved, out: Path):
    graph = _build_graph(r)
    report = xi_recurrent_cells(graph, r.config.theta)
    conds = check_all(graph, report)
    write_json(out / "recurrence.json", report.to_json())
    write_json(out / "conditions.json", {k: v.to_json() for k, v in conds.items()})
    if r.grid.dim == 2:
        (out / "overlay.svg").write_text(render.overlay_svg(r.grid, report), encoding="utf-8")
        (out / "overlay.pgm").write_bytes(render.overlay_pgm(r.grid, report))
    return graph, report, conds


# -- commands ----------------------------------------------------------------

def cmd_discretize(r: Resolved, out: Path) -> int:
    graph = _build_graph(r)
    write_flow_graph(graph, out / "graph_edges.csv", out / "graph_header.json")
    print(f"{graph.n_nodes} cells, {graph.n_edges} edges")
    return EXIT_OK


def cmd_analyze(r: Resolved, out: Path) -> int:
    _, report, conds = _analysis(r, out)
    print(f"R: {len(report.R)} cells, R_xi: {len(report.R_xi)}, C_xi: {len(report.C_xi)}")
    wanted = (r.config.condition,) if r.config.condition else CONDITIONS
    status = EXIT_OK
    for name in CONDITIONS:
        c = conds[name]
        print(f"condition {name}: {'holds' if c.holds else 'fails'}" + ("" if c.holds else f" ({c.violation})"))
        if name in wanted and not c.holds:
            status = EXIT_CONDITION
            if c.witness is not None:
                print(f"  witness: weight {c.witness.weight:.6g}, length {c.witness.length}, "
                      f"class {list(c.witness.z)}")
    return status


def cmd_synthesize(r: Resolved, out: Path) -> int:
    c = r.config
    graph, report, conds = _analysis(r, out)
    eta = conds["III"].eta if conds["III"].holds else None
    result = synthesize(r.spec, graph, report, epsilon=c.epsilon, max_frequency=c.max_frequency,
                        conley=c.conley, eta=eta)
    write_json(out / "lyapunov_data.json", result.data.to_json())
    if not result.feasible:
        w = result.data.witness
        print("synthesis infeasible: a recurrent cycle has nonnegative class weight")
        if w is not None:
            print(f"  witness: weight {w.weight:.6g}, length {w.length}, class {list(w.z)}, "
                  f"nodes {list(w.nodes)[:12]}{' ...' if w.length > 12 else ''}")
        return EXIT_INFEASIBLE
    form = result.smooth.form
    write_json(out / "lyapunov_form.json", form.to_json())
    ver = verify_lyapunov(r.spec, result.smooth, report.R_xi, c.n_samples, c.margin,
                          grid=r.grid, lambda2_bound=c.lambda2_bound, seed=c.seed)
    summary = ver.to_json()
    summary["fit"] = result.smooth.residuals
    summary["conley_term"] = result.conley_included
    write_json(out / "verification.json", summary)
    if r.spec.dim == 2:
        (out / "iota_heatmap.svg").write_text(render.iota_heatmap_svg(r.spec, form), encoding="utf-8")
    print(f"max omega(V) off Y: {ver.lambda1_max_pairing:.6g} (margin {c.margin:g})")
    if not ver.passed:
        print("verification failed")
        return EXIT_VERIFY
    print("verified")
    return EXIT_OK


def _x0_list(r: Resolved) -> np.ndarray:
    c = r.config
    if c.x0 is not None:
        x0 = np.asarray(c.x0, dtype=float)
        if x0.ndim != 2 or x0.shape[1] != r.spec.dim:
            raise ConfigurationError(f"x0 must be a list of {r.spec.dim}-vectors")
        return x0
    return np.random.default_rng(c.seed).random((c.n_random_x0, r.spec.dim))


def cmd_asymptotic(r: Resolved, out: Path) -> int:
    c = r.config
    x0s = _x0_list(r)
    if c.t_total < 100 * c.trajectory_step:
        raise ConfigurationError("t_total must be at least 100 trajectory steps")
    dim = r.spec.dim
    with open(out / "asymptotic.csv", "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        wr.writerow([f"x0_{i}" for i in range(dim)] + [f"A_{i}" for i in range(dim)]
                    + ["pairing", "convergence_gap", "t_total"])
        for x0 in x0s:
            est = estimate_asymptotic_cycle(r.spec, x0, c.t_total, c.trajectory_step)
            wr.writerow([f"{v:.17g}" for v in x0] + [f"{v:.17g}" for v in est.A]
                        + [f"{est.pairing(r.form.period_vector):.17g}", f"{est.convergence_gap:.17g}",
                           f"{c.t_total:.17g}"])
    print(f"{len(x0s)} trajectories written")
    return EXIT_OK


def cmd_oracle_selftest(r: Resolved | None, out: Path, cfg: RunConfig) -> int:
    from .selftest import run_selftest

    summary = run_selftest(cfg.selftest_instances, cfg.seed)
    write_json(out / "oracle_selftest.json", summary)
    print(f"{summary['instances']} instances, {summary['mismatches']} mismatches")
    return EXIT_OK if summary["mismatches"] == 0 else EXIT_VERIFY


COMMANDS = {
    "discretize": cmd_discretize,
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "asymptotic": cmd_asymptotic,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lyapform", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted([*COMMANDS, "oracle-selftest"]))
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("lyapform_out"), help="output directory")
    p.add_argument("--threads", type=int, help="worker cap for graph construction")
    p.add_argument("--seed", type=int, help="seed for sampling and random start points")
    p.add_argument("--condition", choices=CONDITIONS, help="condition that decides the analyze exit code")
    return p


def _load_config(args) -> RunConfig:
    obj = _load_json(args.config) if args.config else {}
    if not isinstance(obj, dict):
        raise ConfigurationError("config must be a JSON object")
    for name in ("threads", "seed", "condition"):
        v = getattr(args, name)
        if v is not None:
            obj[name] = v
    return RunConfig.from_dict(obj)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        base = args.config.parent if args.config else Path(".")
        args.out.mkdir(parents=True, exist_ok=True)
        write_json(args.out / "effective_config.json", cfg.to_json())
        if args.command == "oracle-selftest":
            return cmd_oracle_selftest(None, args.out, cfg)
        r = resolve(cfg, base)
        write_json(args.out / "flow.json", r.spec.to_json())
        return COMMANDS[args.command](r, args.out)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
