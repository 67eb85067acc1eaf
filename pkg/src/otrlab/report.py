"""Scenario runs, sweeps and the files they write.

Output bundle per run directory::

    metrics.csv            one row per query per baseline
    summary.txt / .csv     per-baseline table (recomputable from metrics.csv)
    audit.log              event + contract + dispute transcript lines
    config.resolved.yaml   the config with every default filled in
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence

from . import __version__
from .config import ScenarioConfig, echo_yaml
from .contract import Status
from .econ import expected_cheat_profit, will_cheat
from .hashing import digest, u64
from .simnet import RunMetrics, amortized_cost, amortized_latency, opml_cost, run_scenario, zkml_cost

SCHEMA = "otrlab.metrics/1"
METRIC_COLUMNS = (
    "baseline", "query_id", "sequencer", "strategy", "batch_id", "mode", "status",
    "submit_time", "finality_latency", "hard_finality_latency", "cost", "profit",
)
SUMMARY_COLUMNS = (
    "baseline", "queries", "l_avg", "provisional_latency", "cost_per_query",
    "slash_count", "adversary_mean_profit", "closed_form_latency", "closed_form_cost",
)
SWEEPABLE = ("rho", "p_fish", "l_slash", "batch_size", "query_value")
TERMINAL = {Status.HARD_FINAL.value, Status.SLASHED.value, Status.REJECTED.value, "Accepted"}


class UnknownParameter(ValueError):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _mean(xs) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return sum(xs) / len(xs) if xs else math.nan


def summarize(run: RunMetrics, cfg: ScenarioConfig) -> Dict[str, object]:
    rows = run.records
    rho = cfg.rho()
    closed_latency = {
        "OTR": amortized_latency(rho, cfg.latency),
        "OPML": cfg.latency.t_native + cfg.latency.t_chal,
        "ZKML": cfg.latency.t_zkml_full,
        "PoQ": math.nan,
    }[run.baseline]
    closed_cost = {
        "OTR": amortized_cost(rho, cfg.costs),
        "OPML": opml_cost(cfg.costs),
        "ZKML": zkml_cost(cfg.costs),
        "PoQ": cfg.costs.cost_blob,
    }[run.baseline]
    slashed_batches = {r.batch_id for r in rows if r.status == Status.SLASHED.value}
    return {
        "baseline": run.baseline,
        "queries": len(rows),
        "l_avg": _mean(r.finality_latency for r in rows),
        "provisional_latency": _mean(r.finality_latency for r in rows if r.mode == "Optimistic"),
        "cost_per_query": _mean(r.cost for r in rows),
        "slash_count": len(slashed_batches),
        "adversary_mean_profit": _mean(r.profit for r in rows if r.strategy != "honest"),
        "closed_form_latency": closed_latency,
        "closed_form_cost": closed_cost,
    }


def check_invariants(run: RunMetrics) -> List[str]:
    """Internal checks that gate the CLI exit status."""
    problems = []
    for r in run.records:
        if r.status not in TERMINAL:
            problems.append(f"{run.baseline}: query {r.query_id} ended in {r.status!r}")
            break
    samples = run.finality_samples
    if samples.size and not math.isclose(run.l_avg, float(samples.mean())):
        problems.append(f"{run.baseline}: L_avg differs from mean of finality samples")
    return problems


def metrics_csv(runs: Sequence[RunMetrics]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA} artifact=otrlab-{__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for run in runs:
        for r in run.records:
            row = dataclasses.asdict(r)
            w.writerow([run.baseline] + [_fmt(row[c]) for c in METRIC_COLUMNS[1:]])
    return buf.getvalue()


def summary_csv(summary: Sequence[Dict[str, object]]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema=otrlab.summary/1 artifact=otrlab-{__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in summary:
        w.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def summary_text(cfg: ScenarioConfig, summary: Sequence[Dict[str, object]]) -> str:
    econ = cfg.econ_params()
    lines = [
        f"scenario: {cfg.name or '(unnamed)'}  seed={cfg.seed}  queries={cfg.queries}  "
        f"batch_size={cfg.batch_size}  rho={cfg.rho()}",
        "",
        f"{'baseline':<8} {'L_avg [s]':>12} {'provisional':>12} {'cost/query':>11} "
        f"{'slashes':>8} {'adv. profit':>12}",
    ]
    for s in summary:
        lines.append(
            f"{s['baseline']:<8} {s['l_avg']:>12.4f} {s['provisional_latency']:>12.4f} "
            f"{s['cost_per_query']:>11.4f} {s['slash_count']:>8d} {s['adversary_mean_profit']:>12.4f}"
        )
    lines += [
        "",
        f"closed form: L_avg={amortized_latency(cfg.rho(), cfg.latency):.4f}s  "
        f"cost={amortized_cost(cfg.rho(), cfg.costs):.4f}  "
        f"OPML cost={opml_cost(cfg.costs):.4f}  ZKML cost={zkml_cost(cfg.costs):.4f}",
        f"cheating: E[profit]={expected_cheat_profit(econ):.4f}  will_cheat={will_cheat(econ)}  "
        f"(rho={econ.rho}, p_fish={econ.p_fish}, l_slash={econ.l_slash})",
    ]
    otr = next((s for s in summary if s["baseline"] == "OTR"), None)
    if otr and otr["l_avg"] > 0:
        lines.append(f"speedup vs ZKML: {cfg.latency.t_zkml_full / otr['l_avg']:.1f}x")
    return "\n".join(lines) + "\n"


@dataclass
class ReportBundle:
    output_dir: Path
    runs: Dict[str, RunMetrics]
    summary: List[Dict[str, object]]
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    @property
    def metrics_csv(self) -> Path:
        return self.output_dir / "metrics.csv"

    @property
    def summary_txt(self) -> Path:
        return self.output_dir / "summary.txt"

    @property
    def audit_log(self) -> Path:
        return self.output_dir / "audit.log"

    @property
    def config_echo(self) -> Path:
        return self.output_dir / "config.resolved.yaml"


def run(cfg: ScenarioConfig, output_dir) -> ReportBundle:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = {b: run_scenario(cfg, b) for b in cfg.baselines}
    summary = [summarize(r, cfg) for r in runs.values()]
    problems = [p for r in runs.values() for p in check_invariants(r)]
    bundle = ReportBundle(out, runs, summary, problems)
    bundle.metrics_csv.write_text(metrics_csv(list(runs.values())))
    bundle.summary_txt.write_text(summary_text(cfg, summary))
    (out / "summary.csv").write_text(summary_csv(summary))
    with bundle.audit_log.open("w") as fh:
        for name, r in runs.items():
            fh.write(f"# baseline={name}\n")
            for line in r.audit:
                fh.write(line + "\n")
    bundle.config_echo.write_text(echo_yaml(cfg))
    return bundle


def apply_parameter(cfg: ScenarioConfig, parameter: str, value) -> ScenarioConfig:
    seed = int.from_bytes(digest(b"otr/sweep-seed", u64(cfg.seed), repr(value).encode())[:8], "big")
    if parameter == "rho":
        sec = dataclasses.replace(cfg.security, rho=float(value), pricing=None)
        cfg = dataclasses.replace(cfg, security=sec)
    elif parameter == "p_fish":
        fish = dataclasses.replace(cfg.fishermen, p_fish=float(value))
        cfg = dataclasses.replace(cfg, fishermen=fish)
    elif parameter == "l_slash":
        cfg = dataclasses.replace(cfg, econ=dataclasses.replace(cfg.econ, l_slash=float(value)))
    elif parameter == "batch_size":
        cfg = dataclasses.replace(cfg, batch_size=int(value))
    elif parameter == "query_value":
        cfg = dataclasses.replace(cfg, query_value=float(value))
    else:
        raise UnknownParameter(f"{parameter!r} is not sweepable; choose from {', '.join(SWEEPABLE)}")
    cfg = dataclasses.replace(cfg, seed=seed)
    return dataclasses.replace(cfg, econ=cfg.econ_params())


SWEEP_COLUMNS = (
    "parameter", "value", "seed", "baseline", "rho", "p_fish", "l_slash", "l_avg",
    "closed_form_latency", "cost_per_query", "closed_form_cost", "slash_count",
    "adversary_mean_profit", "expected_cheat_profit", "will_cheat",
)


def _sweep_one(args):
    cfg, parameter, value, out = args
    sub = apply_parameter(cfg, parameter, value)
    return value, sub, run(sub, out)


def sweep(cfg: ScenarioConfig, parameter: str, values: Sequence, output_dir, workers: int = 1):
    """One isolated sub-run per value plus ``sweep.csv`` combining their summaries."""
    if parameter not in SWEEPABLE:
        raise UnknownParameter(f"{parameter!r} is not sweepable; choose from {', '.join(SWEEPABLE)}")
    if not values:
        raise ValueError("sweep needs at least one value")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, parameter, v, out / f"{parameter}={v}") for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    buf = io.StringIO()
    buf.write(f"# schema=otrlab.sweep/1 artifact=otrlab-{__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for value, sub, bundle in results:
        econ = sub.econ_params()
        for s in bundle.summary:
            w.writerow([_fmt(x) for x in (
                parameter, value, sub.seed, s["baseline"], econ.rho, econ.p_fish, econ.l_slash,
                s["l_avg"], s["closed_form_latency"], s["cost_per_query"], s["closed_form_cost"],
                s["slash_count"], s["adversary_mean_profit"], expected_cheat_profit(econ),
                will_cheat(econ),
            )])
    (out / "sweep.csv").write_text(buf.getvalue())
    return [b for _, _, b in results], out / "sweep.csv"
