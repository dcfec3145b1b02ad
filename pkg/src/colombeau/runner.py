"""Scenario execution and report emission.

``report.json`` is deterministic for a given scenario: it holds no
timestamps or wall times.  Timings go to the text summary and to
``timings.json``.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import gd, ge, gs
from .asymptotics import InsufficientData, Verdict, _jsonable, fit_order
from .matrix import det, nondegenerate_verdict
from .numbers import Num
from .scenario import Scenario, ScenarioError, Task
from .testfn import from_record, scale

REPORT_SCHEMA = "colombeau-report/1"
CSV_FIELDS = ["task", "kind", "verdict", "label", "slope", "intercept", "residual",
              "window_hi", "window_lo", "n_points", "n_zero"]


@dataclass
class TaskResult:
    id: str
    kind: str
    status: str = "ok"
    verdict: Optional[dict] = None
    estimates: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    replay: Optional[dict] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "status": self.status, "verdict": self.verdict,
            "estimates": self.estimates, "data": self.data, "replay": self.replay, "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskResult":
        return cls(d["id"], d["kind"], d["status"], d["verdict"], d["estimates"], d["data"], d["replay"], d["error"])


@dataclass
class Report:
    scenario: str
    domain: dict
    battery: Optional[dict]
    tasks: list[TaskResult]
    schema: str = REPORT_SCHEMA
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def failed(self) -> bool:
        return any(t.status == "error" for t in self.tasks)

    def to_dict(self) -> dict:
        return {"schema": self.schema, "scenario": self.scenario, "domain": self.domain,
                "battery": self.battery, "tasks": [t.to_dict() for t in self.tasks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(d["scenario"], d["domain"], d["battery"], [TaskResult.from_dict(t) for t in d["tasks"]], d["schema"])


def load_report(path) -> Report:
    return Report.from_dict(json.loads(Path(path).read_text()))


# -- task handlers ---------------------------------------------------------------

def _verdict_result(task: Task, v: Verdict, data: Optional[dict] = None) -> TaskResult:
    d = v.to_dict()
    return TaskResult(task.id, task.kind, verdict=d, estimates=d["estimates"], data=_jsonable(data or {}))


def _replay_record(witness: dict, magnitude: float) -> dict:
    want = witness.get("magnitude")
    ok = want is not None and (magnitude == want or abs(magnitude - want) <= 1e-12 * max(1.0, abs(want)))
    return {"magnitude": magnitude, "matches": bool(ok)}


def _t_order(sc: Scenario, t: Task):
    R = sc.obj(t.get("target"), "efunc")
    x = np.atleast_1d(np.asarray(t.get("x", [0.0] * sc.n), dtype=float))
    alpha = tuple(t.get("alpha", [0] * sc.n))
    qs = t.get("q", list(range(sc.battery.q_max + 1)))
    grid = sc.battery.grid
    estimates, slopes = [], {}
    for q in qs:
        phi = sc.battery.phis[q]
        mags = [abs(R.evaluate(scale(phi, e), x[None, :], alpha)[0]) for e in grid.exact]
        try:
            est = fit_order(grid.values, mags, label=f"|d^{alpha} {R.label}(S_eps phi_{q}, {x.tolist()})|")
        except InsufficientData as exc:
            slopes[str(q)] = str(exc)
            continue
        estimates.append(est.to_dict())
        slopes[str(q)] = est.slope
    return TaskResult(t.id, t.kind, estimates=estimates, data=_jsonable({"slopes": slopes, "x": x}))


def _t_ge_moderate(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    v = ge.ge_moderate_verdict(R, sc.k_box(t), int(t.get("alpha_max", 0)), sc.battery)
    return _verdict_result(t, v)


def _t_ge_negligible(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    v = ge.ge_negligible_verdict(R, sc.k_box(t), int(t.get("m_max", 8)), sc.battery)
    return _verdict_result(t, v)


def _t_characterization(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    v = ge.characterization_pipeline(R, sc.k_box(t), int(t.get("m0", 1)), sc.battery)
    return _verdict_result(t, v)


def _t_point_value(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    X = sc.obj(t.get("point"), "point")
    r = ge.ge_point_eval(R, X)
    v = ge.number_negligible_verdict(r, sc.battery, int(t.get("m_max", 8)))
    values = {str(q): abs(r(phi)) for q, phi in enumerate(sc.battery.phis)}
    return _verdict_result(t, v, {"abs_value_unscaled": values, "point": X.sexpr()})


def _number_task(fn):
    def handler(sc, t):
        r = sc.obj(t.get("target"), "number")
        if fn is ge.number_negligible_verdict:
            v = fn(r, sc.battery, int(t.get("m_max", 8)))
        else:
            v = fn(r, sc.battery)
        return _verdict_result(t, v, {"number": r.sexpr()})
    return handler


def _t_invertible(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    v = ge.ge_invertible_verdict(R, _k_list(sc, t), sc.battery)

    return _verdict_result(t, v)


class _SupOver(Num):
    def __init__(self, R, K):
        self.R, self.K = R, K

    def __call__(self, phi):
        ok = self.R.guard(phi, self.K.grid)
        return float(np.max(np.abs(self.R.evaluate(phi, self.K.grid[ok])))) if ok.any() else 0.0

    def sexpr(self):
        return f"(sup {self.R.label})"


def _t_leq(sc, t):
    r, s = sc.obj(t.get("r"), "number"), sc.obj(t.get("s"), "number")
    v = ge.leq_verdict(r, s, sc.battery, int(t.get("m_max", 8)))
    return _verdict_result(t, v)


def _t_nondegenerate(sc, t):
    A = sc.obj(t.get("target"), "matrix")
    v = nondegenerate_verdict(A, sc.battery)
    return _verdict_result(t, v, {"det": det(A).sexpr()})


def _t_ge_constant(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    X = sc.obj(t.get("point"), "point")
    v = ge.ge_constant_check(R, sc.k_box(t, "K1"), sc.k_box(t, "K2"), X, sc.battery, int(t.get("m_max", 8)))

    return _verdict_result(t, v)


def _t_gs_moderate(sc, t):
    u = sc.obj(t.get("target"), "net")
    v = gs.gs_moderate_verdict(u, sc.k_box(t), int(t.get("alpha_max", 0)), sc.grid)
    return _verdict_result(t, v)


def _t_gs_negligible(sc, t):
    u = sc.obj(t.get("target"), "net")
    v = gs.gs_negligible_verdict(u, sc.k_box(t), int(t.get("m_max", 8)), sc.grid)
    return _verdict_result(t, v)


def _t_gs_constant(sc, t):
    u = sc.obj(t.get("target"), "net")
    v = gs.gs_constant_check(u, sc.k_box(t), sc.grid, int(t.get("m_max", 8)))

    return _verdict_result(t, v)


def _t_gs_witness(sc, t):
    u = sc.obj(t.get("target"), "net")
    X = gs.gs_witness_search(u, sc.k_box(t), int(t.get("m0", 1)), sc.grid)
    if X is None:
        return TaskResult(t.id, t.kind, data={"found": False})
    pv = gs.gs_point_eval(u, X)
    e = sc.grid.values[sc.grid.asymptotic_slice()]
    data = {"found": True, **X.notes, "points": [X(x).tolist() for x in e],
            "values": [abs(pv(x)) for x in e], "eps": e.tolist()}
    return TaskResult(t.id, t.kind, data=_jsonable(data))


def _t_gs_point_eval(sc, t):
    u = sc.obj(t.get("target"), "net")
    X = sc.obj(t.get("point"), "gs_point")
    r = gs.gs_point_eval(u, X)
    vals = r.sample(sc.grid)
    est = []
    try:
        est = [fit_order(sc.grid.values, np.abs(vals), label=f"|{r.label}|").to_dict()]
    except InsufficientData:
        pass
    return TaskResult(t.id, t.kind, estimates=est, data=_jsonable({"eps": sc.grid.values, "values": vals}))


def _nets(sc, t):
    names = t.get("nets")
    if names is None:
        return [gd.TestObjectNet.constant(p) for p in sc.battery.phis]
    return [sc.obj(n, "test_object_net") for n in names]


def _t_gd_moderate(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    v = gd.gd_moderate_verdict(R, sc.k_box(t), int(t.get("alpha_max", 0)), _nets(sc, t), sc.grid)
    return _verdict_result(t, v)


def _t_gd_negligible(sc, t):
    R = sc.obj(t.get("target"), "efunc")
    v = gd.gd_negligible_verdict(R, sc.k_box(t), int(t.get("m_max", 8)), _nets(sc, t), sc.grid)
    return _verdict_result(t, v)


HANDLERS: dict[str, Callable] = {
    "order": _t_order,
    "ge_moderate": _t_ge_moderate,
    "ge_negligible": _t_ge_negligible,
    "characterization": _t_characterization,
    "point_value": _t_point_value,
    "strictly_nonzero": _number_task(ge.strictly_nonzero_verdict),
    "number_moderate": _number_task(ge.number_moderate_verdict),
    "number_negligible": _number_task(ge.number_negligible_verdict),
    "invertible": _t_invertible,
    "leq": _t_leq,
    "nondegenerate": _t_nondegenerate,
    "ge_constant": _t_ge_constant,
    "gs_moderate": _t_gs_moderate,
    "gs_negligible": _t_gs_negligible,
    "gs_constant": _t_gs_constant,
    "gs_witness": _t_gs_witness,
    "gs_point_eval": _t_gs_point_eval,
    "gd_moderate": _t_gd_moderate,
    "gd_negligible": _t_gd_negligible,
}


# -- witness replay ------------------------------------------------------------------

def _k_list(sc: Scenario, t: Task) -> list:
    return [sc.k_box(Task(t.id, t.kind, {"K": b, "K_points": t.get("K_points", 129)}))
            for b in t.get("Ks", [t.get("K")])]


def replayer(sc: Scenario, t: Task) -> Optional[Callable[[dict], float]]:
    """witness -> magnitude, rebuilt from the scenario alone; None for tasks without witnesses."""
    k = t.kind
    if k in ("ge_moderate", "ge_negligible", "characterization", "gd_moderate", "gd_negligible"):
        R = sc.obj(t.get("target"), "efunc")
        return lambda w: ge.replay_witness(R, w)
    if k == "point_value":
        r = ge.ge_point_eval(sc.obj(t.get("target"), "efunc"), sc.obj(t.get("point"), "point"))
        return lambda w: ge.replay_number(r, w)
    if k in ("strictly_nonzero", "number_moderate", "number_negligible"):
        r = sc.obj(t.get("target"), "number")
        return lambda w: ge.replay_number(r, w)
    if k == "nondegenerate":
        r = det(sc.obj(t.get("target"), "matrix"))
        return lambda w: ge.replay_number(r, w)
    if k == "leq":
        r = sc.obj(t.get("r"), "number") - sc.obj(t.get("s"), "number")
        return lambda w: ge.replay_number(r, w)
    if k == "invertible":
        R, Ks = sc.obj(t.get("target"), "efunc"), _k_list(sc, t)
        return lambda w: ge.replay_number(_SupOver(R, next(K for K in Ks if K.to_dict() == w["K"])), w)
    if k == "ge_constant":
        R = sc.obj(t.get("target"), "efunc")

        def spread_at(w):
            phi = from_record(w["phi"])
            return float(abs(R.evaluate(phi, [w["y"]])[0] - R.evaluate(phi, [w["X"]])[0]))

        return spread_at
    if k in ("gs_moderate", "gs_negligible"):
        u = sc.obj(t.get("target"), "net")
        return lambda w: float(np.abs(u.evaluate(w["eps"], [w["x"]], tuple(w.get("alpha") or (0,) * u.n)))[0])
    if k == "gs_constant":
        u = sc.obj(t.get("target"), "net")

        def gs_spread_at(w):
            a, b = u.evaluate(w["eps"], [w["x"], w["y"]])
            return float(abs(a - b))

        return gs_spread_at
    return None


def replay_report(sc: Scenario, report: Report) -> dict:
    """Re-evaluate every recorded witness; task id -> replay record."""
    tasks = {t.id: t for t in sc.tasks}
    out = {}
    for r in report.tasks:
        w = (r.verdict or {}).get("witness")
        if not w or "magnitude" not in w or r.id not in tasks:
            continue
        fn = replayer(sc, tasks[r.id])
        if fn is not None:
            out[r.id] = _replay_record(w, fn(w))
    return out


def run_task(sc: Scenario, t: Task) -> TaskResult:
    handler = HANDLERS.get(t.kind)
    if handler is None:
        return TaskResult(t.id, t.kind, status="error", error=f"unknown task kind {t.kind!r}")
    try:
        result = handler(sc, t)
        w = (result.verdict or {}).get("witness")
        replay = replayer(sc, t) if w and "magnitude" in w else None
        if replay is not None:
            result.replay = _replay_record(w, replay(w))
    except (ScenarioError, ValueError, KeyError, TypeError, ArithmeticError) as exc:
        return TaskResult(t.id, t.kind, status="error", error=f"{type(exc).__name__}: {exc}")
    return result


def run_scenario(sc: Scenario, parallel: bool = False, workers: Optional[int] = None) -> Report:
    """Run every task; task failures are recorded in the report, not raised."""
    timings = {}

    def timed(t):
        start = time.perf_counter()
        r = run_task(sc, t)
        timings[t.id] = time.perf_counter() - start
        return r

    if parallel and len(sc.tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(timed, sc.tasks))
    else:
        results = [timed(t) for t in sc.tasks]
    battery = sc.battery.manifest() if sc.tasks else None
    rep = Report(sc.name, sc.domain.to_dict(), _jsonable(battery), results)
    rep.timings = timings
    return rep


# -- emission -----------------------------------------------------------------------

def csv_rows(report: Report) -> list[dict]:
    rows = []
    for t in report.tasks:
        kind = (t.verdict or {}).get("kind", "")
        for est in t.estimates:
            rows.append({"task": t.id, "kind": t.kind, "verdict": kind, **{k: est[k] for k in CSV_FIELDS[3:]}})
    return rows


def text_summary(report: Report) -> str:
    lines = [f"scenario {report.scenario}", f"battery {(report.battery or {}).get('id', '-')}"]
    for t in report.tasks:
        secs = report.timings.get(t.id)
        took = f" ({secs:.2f}s)" if secs is not None else ""
        if t.status == "error":
            lines.append(f"{t.id} [{t.kind}]: ERROR {t.error}{took}")
            continue
        v = t.verdict
        if v is None:
            detail = ", ".join(f"{k}={val}" for k, val in sorted(t.data.items()) if k in ("found", "slopes", "hits"))
            lines.append(f"{t.id} [{t.kind}]: {detail or 'done'}{took}")
            continue
        bits = [v["kind"]]
        if v.get("max_order") is not None:
            bits.append(f"max_order={v['max_order']}")
        for key in ("N", "q", "L"):
            if key in v.get("certificates", {}):
                bits.append(f"{key}={v['certificates'][key]}")
        if v.get("witness"):
            bits.append(f"witness magnitude={v['witness'].get('magnitude')}")
        if t.replay:
            bits.append("replay ok" if t.replay["matches"] else "REPLAY MISMATCH")
        if v.get("reason"):
            bits.append(v["reason"])
        lines.append(f"{t.id} [{t.kind}]: " + " ".join(str(b) for b in bits) + took)
    return "\n".join(lines) + "\n"


def emit(report: Report, out_dir, formats=("json", "csv", "text")) -> list[Path]:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    for fmt in formats:
        if fmt == "json":
            p = out / "report.json"
            p.write_text(report.to_json())
            t = out / "timings.json"
            t.write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
            written += [p, t]
        elif fmt == "csv":
            p = out / "estimates.csv"
            with p.open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
                w.writeheader()
                w.writerows(csv_rows(report))
            written.append(p)
        elif fmt == "text":
            p = out / "summary.txt"
            p.write_text(text_summary(report))
            written.append(p)
        else:
            raise ValueError(f"unknown report format {fmt!r}")
    return written
