"""Command line runner.

    stratretract run --config cfg.json [--out DIR] [--seed N]
    stratretract list-scenarios [--json] [--no-color]
    stratretract verify --scenario NAME [--suite S ...]
    stratretract retract --scenario NAME --samples K

Exit codes: 0 every suite verified or skipped, 1 a suite failed or was
inconclusive, 2 configuration error, 3 build error.  ``report.json`` holds no
timing so that equal configs give byte-identical reports; wall-clock times
go to ``timing.json``.  ``STRATRETRACT_OUT`` overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import controldata as cdm
from . import examples as ex
from . import retract as rt
from .errors import ConfigError, StratError
from .scenarios import SCENARIOS, custom_scenario, get_scenario
from .smoothcore import FlowOptions

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUILD = 0, 1, 2, 3
OUT_ENV = "STRATRETRACT_OUT"

VERIFY_SUITES = ("adjusted", "tangential", "precommute", "commute", "equivariant")
ALL_SUITES = ("stage1",) + VERIFY_SUITES + ("retract", "momentum", "hilbert")
_VERIFIERS = {
    "adjusted": cdm.verify_adjusted,
    "tangential": cdm.verify_tangential,
    "precommute": cdm.verify_precommute,
    "commute": cdm.verify_commute,
    "equivariant": cdm.verify_equivariant,
}
_CONFIG_KEYS = {"scenario", "custom", "seed", "samples", "retract_samples", "verify_tol", "retract_tol", "equivariance_tol", "flow", "suites", "out", "trajectory_samples"}


@dataclass
class RunConfig:
    scenario: Optional[str] = None
    custom: Optional[dict] = None
    seed: int = 42
    samples: int = 200
    retract_samples: int = 200
    trajectory_samples: int = 10
    verify_tol: float = 1e-5
    retract_tol: float = 1e-5
    equivariance_tol: float = 1e-6
    flow: dict = field(default_factory=lambda: {"rel_tol": 1e-9, "abs_tol": 1e-11, "max_steps": 100000})
    suites: Optional[list] = None
    out: str = "out"

    def validate(self) -> None:
        if (self.scenario is None) == (self.custom is None):
            raise ConfigError("give exactly one of 'scenario' or 'custom'")
        if self.scenario is not None and self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; known: {', '.join(SCENARIOS)}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for k in ("samples", "retract_samples", "trajectory_samples"):
            v = getattr(self, k)
            if not isinstance(v, int) or v < 0 or (k != "trajectory_samples" and v == 0):
                raise ConfigError(f"{k} must be a positive integer")
        for k in ("verify_tol", "retract_tol", "equivariance_tol"):
            v = getattr(self, k)
            if not isinstance(v, (int, float)) or not v > 0 or math.isinf(v):
                raise ConfigError(f"{k} must be a positive number")
        extra = set(self.flow) - {"rel_tol", "abs_tol", "max_steps"}
        if extra:
            raise ConfigError(f"unknown flow options: {sorted(extra)}")
        try:
            FlowOptions(**self.flow)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad flow options: {exc}") from exc
        if self.suites is not None:
            bad = [s for s in self.suites if s not in ALL_SUITES]
            if bad:
                raise ConfigError(f"unknown suites {bad}; known: {', '.join(ALL_SUITES)}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(data) - _CONFIG_KEYS
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if exc.lineno - 1 < len(text.splitlines()) else ""
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc
    return RunConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Report helpers
# ---------------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


@dataclass
class SuiteOutcome:
    name: str
    status: str
    stats: dict
    rows: list = field(default_factory=list)
    header: tuple = ()


def _suite_from_report(name: str, rep: cdm.SuiteReport) -> SuiteOutcome:
    rows = [[r.prop, "<".join(r.pair), r.samples, r.skipped, r.worst, r.worst_scaled, r.status] for r in rep.results]
    stats = {"tol": rep.tol, "worst_scaled": rep.worst, "results": [r.as_dict() for r in rep.results], "notes": rep.notes}
    return SuiteOutcome(name, rep.status, stats, rows, ("property", "pair", "samples", "skipped", "worst", "worst_scaled", "status"))


def _momentum_suite(cfg: RunConfig, cd, h) -> SuiteOutcome:
    s = cd.scenario
    weights = tuple(s.extras.get("weights", (1, -1)))
    ham = ex.TorusHamiltonian(len(weights), weights)
    rng = np.random.default_rng(cfg.seed)
    zero = s.stratum("X1").sample(rng, 1000)
    crit = max(ex.crit_residual(ham, z) for z in zero)
    mu_on_zero = max(abs(ham.mu(z)) for z in zero)
    act = ham.action
    qh = max(float(np.max(np.abs(ex.quadratic_moment(act, 2 * z) - 4 * ex.quadratic_moment(act, z)))) for z in zero[:100])
    cv = max(ex.cv_residual(act, None, 0.5 * z) for z in zero[:100])
    pts = rt.neighbourhood_samples(cd, rng, 20)
    flow_opts = FlowOptions(**cfg.flow)
    grad_end = max((abs(ham.mu(ex.norm_sq_gradient_limit(ham, p, 40.0, flow_opts))) for p in pts), default=0.0)
    retr_end = max((abs(ham.mu(h.eval(1.0, p))) for p in pts), default=0.0)
    stats = {
        "crit_residual_on_zero": crit,
        "max_abs_mu_on_zero": mu_on_zero,
        "q_homogeneity_defect": qh,
        "cv_residual_scaled_zeros": cv,
        "gradient_flow_endpoint_abs_mu": grad_end,
        "retraction_endpoint_abs_mu": retr_end,
        "comparator_samples": len(pts),
    }
    ok = crit <= 1e-12 and qh == 0.0 and cv <= 1e-12 and grad_end <= 1e-5 and retr_end <= 1e-5 and bool(pts)
    rows = [[k, v] for k, v in stats.items()]
    return SuiteOutcome("momentum", cdm.VERIFIED if ok else cdm.FAILED, stats, rows, ("metric", "value"))


def _hilbert_suite(cfg: RunConfig, cd) -> SuiteOutcome:
    model = ex.d3_model()
    img = ex.d3_image_check(1000, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    edge = []
    for _ in range(200):
        r = rng.uniform(0.05, 2.0)
        edge.append(np.array([r * r, r ** 3 * rng.choice([-1.0, 1.0])]))
    inner = [ex.hilbert_d3(p) for p in rng.uniform(-2, 2, (200, 2))]
    qh = {name: ex.quasi_homog_check(model, model.strata[name], edge + inner) for name in ("edge+", "edge-", "interior")}
    reduced = ex.reduce_control_data(cd, model, samples=min(cfg.samples, 40), seed=cfg.seed)
    inv = {nb.stratum: ex.fibered_invariants(nb) for nb in reduced}
    stats = {
        "image": asdict(img),
        "quasi_homogeneous": {k: asdict(v) for k, v in qh.items()},
        "reduced": {k: asdict(v) for k, v in inv.items()},
    }
    ok = img.passed and all(v.passed for v in qh.values()) and all(v.passed for v in inv.values())
    rows = [["image", "all", img.max_violation, img.max_gap_error, img.misclassified]]
    rows += [["reduced", k, v.semigroup, v.homogeneity, int(not v.strata_preserved)] for k, v in inv.items()]
    return SuiteOutcome("hilbert", cdm.VERIFIED if ok else cdm.FAILED, stats, rows, ("check", "target", "residual_a", "residual_b", "defects"))


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _selected(cfg: RunConfig, s) -> list:
    default = list(ALL_SUITES)
    if s.name not in ("MOMZERO", "CRIT11") and s.extras.get("family") != "momentum":
        default.remove("momentum")
    if s.extras.get("family") != "d3":
        default.remove("hilbert")
    if cfg.suites is None:
        return default
    return [x for x in ALL_SUITES if x in cfg.suites]


def run(cfg: RunConfig, out: Optional[Path] = None) -> tuple:
    """Run the pipeline; returns ``(exit_code, report_dict)`` and writes files."""
    cfg.validate()
    scen = get_scenario(cfg.scenario) if cfg.scenario else custom_scenario(cfg.custom)
    out = Path(out or os.environ.get(OUT_ENV) or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    suites = _selected(cfg, scen)
    outcomes: list = []
    timing: dict = {}
    report = {
        "config": _clean(asdict(cfg) | {"out": None}),
        "scenario": {"name": scen.name, "ambient_dim": scen.n, "strata": [st.id for st in scen.strata], "section": scen.section},
        "suites": [],
        "artifacts": [],
        "build": {},
    }
    code = EXIT_OK

    def clock(name, t0):
        timing[name] = time.perf_counter() - t0

    try:
        t0 = time.perf_counter()
        tang = cdm.build_tangential(scen, cfg.seed)
        clock("build_tangential", t0)
        report["build"]["tangential_notes"] = list(tang.notes)
        if "stage1" in suites:
            t0 = time.perf_counter()
            for name in ("adjusted", "tangential", "precommute"):
                rep, tang = _VERIFIERS[name](tang, cfg.samples, cfg.verify_tol, cfg.seed)
                o = _suite_from_report(f"stage1.{name}", rep)
                outcomes.append(o)
            clock("stage1", t0)
        t0 = time.perf_counter()
        cd = cdm.build_commutative(scen, cfg.seed, base=tang)
        clock("build_commutative", t0)
        report["build"]["commutative_notes"] = list(cd.notes)
    except StratError as exc:
        report["build"]["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_BUILD
        _finish(out, report, outcomes, timing, code)
        return code, report

    need_verified = any(x in suites for x in ("retract", "momentum", "hilbert"))
    for name in VERIFY_SUITES:
        if name in suites or need_verified:
            t0 = time.perf_counter()
            tol = cfg.equivariance_tol if name == "equivariant" else cfg.verify_tol
            n = max(10, cfg.samples // 2) if name == "equivariant" else cfg.samples
            rep, cd = _VERIFIERS[name](cd, n, tol, cfg.seed)
            clock(name, t0)
            if name in suites:
                outcomes.append(_suite_from_report(name, rep))
    h = None
    if "retract" in suites or "momentum" in suites:
        try:
            h = rt.build_homotopy(cd)
        except StratError as exc:
            report["build"]["homotopy_error"] = f"{type(exc).__name__}: {exc}"
    if "retract" in suites:
        t0 = time.perf_counter()
        if h is None:
            outcomes.append(SuiteOutcome("retract", cdm.INCONCLUSIVE, {"reason": report["build"].get("homotopy_error")}))
        else:
            rr = rt.retraction_metrics(h, cfg.retract_samples, cfg.seed, strict_tol=cfg.retract_tol)
            rows = [[i, r] for i, r in enumerate(rr.residuals)]
            outcomes.append(SuiteOutcome("retract", rr.status, rr.as_dict(), rows, ("sample", "c_residual")))
            pts = rt.neighbourhood_samples(cd, np.random.default_rng(cfg.seed), cfg.trajectory_samples)
            header, trows = rt.trajectory_rows(h, pts)
            rt.write_csv(out / "trajectories.csv", header, trows)
            report["artifacts"].append("trajectories.csv")
        clock("retract", t0)
    if "momentum" in suites:
        t0 = time.perf_counter()
        outcomes.append(_momentum_suite(cfg, cd, h) if h is not None else SuiteOutcome("momentum", cdm.INCONCLUSIVE, {}))
        clock("momentum", t0)
    if "hilbert" in suites:
        t0 = time.perf_counter()
        try:
            outcomes.append(_hilbert_suite(cfg, cd))
        except StratError as exc:
            outcomes.append(SuiteOutcome("hilbert", cdm.FAILED, {"error": f"{type(exc).__name__}: {exc}"}))
        clock("hilbert", t0)
    if any(o.status in (cdm.FAILED, cdm.INCONCLUSIVE) for o in outcomes):
        code = EXIT_FAIL
    _finish(out, report, outcomes, timing, code)
    return code, report


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")


def _finish(out: Path, report: dict, outcomes: list, timing: dict, code: int) -> None:
    for o in outcomes:
        report["suites"].append({"name": o.name, "status": o.status, "stats": o.stats})
        if o.rows:
            fname = f"residuals_{o.name}.csv"
            rt.write_csv(out / fname, o.header, o.rows)
            report["artifacts"].append(fname)
    report["artifacts"] = sorted(set(report["artifacts"]))
    report["exit_code"] = code
    _write_json(out / "report.json", report)
    _write_json(out / "timing.json", {"seconds": timing})


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def list_scenarios(as_json: bool = False, color: bool = True) -> str:
    rows = [
        {"name": i.name, "ambient_dim": i.ambient_dim, "strata": i.strata, "action": i.action, "section": i.section}
        for i in SCENARIOS.values()
    ]
    if as_json:
        return json.dumps(rows, indent=2)
    cols = ("name", "ambient_dim", "strata", "action", "section")
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in cols}
    head = "  ".join(c.ljust(widths[c]) for c in cols)
    if color:
        head = f"\033[1m{head}\033[0m"
    lines = [head] + ["  ".join(str(r[c]).ljust(widths[c]) for c in cols) for r in rows]
    return "\n".join(lines)


def _summary(report: dict) -> str:
    lines = [f"scenario {report['scenario']['name']}"]
    for s in report["suites"]:
        lines.append(f"  {s['name']:<22} {s['status']}")
    if "error" in report["build"]:
        lines.append(f"  build error: {report['build']['error']}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stratretract", description="Control data and deformation retractions for stratified subsets.")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the full pipeline from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    ls = sub.add_parser("list-scenarios", help="list built-in scenarios")
    ls.add_argument("--json", action="store_true")
    ls.add_argument("--no-color", action="store_true")
    v = sub.add_parser("verify", help="build control data and run verification suites")
    v.add_argument("--scenario", required=True)
    v.add_argument("--suite", action="append", choices=("stage1",) + VERIFY_SUITES)
    v.add_argument("--samples", type=int, default=200)
    v.add_argument("--tol", type=float, default=1e-5)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--out")
    rr = sub.add_parser("retract", help="build the homotopy and measure the retraction")
    rr.add_argument("--scenario", required=True)
    rr.add_argument("--samples", type=int, default=200)
    rr.add_argument("--seed", type=int, default=42)
    rr.add_argument("--out")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "list-scenarios":
        print(list_scenarios(args.json, color=not args.no_color and sys.stdout.isatty()))
        return EXIT_OK
    try:
        if args.cmd == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.seed = args.seed
        elif args.cmd == "verify":
            cfg = RunConfig(scenario=args.scenario, seed=args.seed, samples=args.samples, verify_tol=args.tol, suites=list(args.suite or VERIFY_SUITES))
        else:
            cfg = RunConfig(scenario=args.scenario, seed=args.seed, retract_samples=args.samples, suites=["retract"])
        cfg.validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, report = run(cfg, Path(args.out) if args.out else None)
    print(_summary(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
