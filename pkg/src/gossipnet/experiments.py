"""Experiment harness: seeded sweeps, CSV output, scaling fits, plots.

A sweep runs one protocol over a list of graph sizes, many trials per
size, and writes one CSV row per trial. Fits aggregate the rows into
per-size percentile statistics, a log-log slope against n, and the
ratio of the stopping statistic to the (k + ln n + D) * max_degree
budget. Every trial's stream is derived from (seed, family, n, trial),
so reruns are byte-identical regardless of worker count or completion
order.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import protocols
from .graph import FAMILIES, generate, metrics
from .protocols import (
    DEFAULT_ROUND_CAP,
    StoppingReport,
    run_brr_broadcast,
    run_tag,
    run_uniform_ag,
)
from .rng import derive_seed

PROTOCOLS = ("uniform_ag", "brr", "tag", "tag_oracle")
K_RULE_NAMES = ("fixed", "equal_n", "sqrt_n", "log_n", "polylog")


def resolve_k(rule: str, n: int) -> int:
    """Map a k rule ("fixed:8", "equal_n", "sqrt_n", "log_n",
    "polylog:2") to a message count for size n."""
    name, _, arg = rule.partition(":")
    if name == "fixed":
        k = int(arg)
    elif name == "equal_n":
        k = n
    elif name == "sqrt_n":
        k = math.isqrt(n)
    elif name == "log_n":
        k = max(1, math.ceil(math.log2(n)))
    elif name == "polylog":
        p = float(arg) if arg else 2.0
        k = max(1, math.ceil(math.log2(n) ** p))
    else:
        raise ValueError(f"unknown k rule {rule!r}")
    if not 1 <= k <= n:
        raise ValueError(f"k rule {rule!r} gives k={k} outside [1, {n}]")
    return k


def default_trials(n: int) -> int:
    """Per-size trial budget: denser sampling at small n."""
    return 200 if n <= 128 else 50


@dataclass(frozen=True)
class ExperimentSpec:
    """Complete, serializable description of one sweep."""

    protocol: str
    family: str
    n_list: tuple[int, ...]
    k_rule: str = "equal_n"
    time_model: str = "async"
    action: str = "EXCHANGE"
    q: int = 2
    trials: int | None = None
    seed: int = 0
    percentile: float = 99.0
    out_csv: str | None = None
    graph_seed: int = 0
    workers: int = 1
    engine: str = "auto"
    cap: int = DEFAULT_ROUND_CAP

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.n_list:
            raise ValueError("n list must not be empty")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.time_model not in ("sync", "async"):
            raise ValueError(f"unknown time model {self.time_model!r}")
        if self.action not in ("PUSH", "PULL", "EXCHANGE"):
            raise ValueError(f"unknown action {self.action!r}")
        if self.q not in (2, 4, 16, 256):
            raise ValueError(f"unsupported field size {self.q}")
        if self.trials is not None and self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 < self.percentile <= 100:
            raise ValueError("percentile must lie in (0, 100]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        for n in self.n_list:
            resolve_k(self.k_rule, n)  # raises if the rule leaves [1, n]

    def trials_for(self, n: int) -> int:
        return self.trials if self.trials is not None else default_trials(n)

    @classmethod
    def from_config(cls, config: dict, **overrides) -> "ExperimentSpec":
        """Build a spec from a JSON-style dict; keyword args win."""
        merged = dict(config)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        if "n" in merged:
            merged["n_list"] = merged.pop("n")
        if "k" in merged:
            merged["k_rule"] = merged.pop("k")
        if "out" in merged:
            merged["out_csv"] = merged.pop("out")
        known = {f.name for f in fields(cls)}
        unknown = set(merged) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = [key for key in ("protocol", "family") if key not in merged]
        if missing:
            raise ValueError(f"config must supply {missing}")
        n_list = merged.pop("n_list", None)
        if n_list is None:
            raise ValueError("config must supply the size list 'n'")
        if isinstance(n_list, int):
            n_list = [n_list]
        return cls(n_list=tuple(n_list), **merged)

    def to_config(self) -> dict:
        cfg = {
            "protocol": self.protocol, "family": self.family,
            "n": list(self.n_list), "k": self.k_rule,
            "time_model": self.time_model, "action": self.action,
            "q": self.q, "trials": self.trials, "seed": self.seed,
            "percentile": self.percentile, "out": self.out_csv,
            "graph_seed": self.graph_seed, "workers": self.workers,
            "engine": self.engine, "cap": self.cap,
        }
        return cfg


def bound_ratio(stat: float, n: int, k: int, diameter: int,
                max_degree: int) -> float:
    """Stopping statistic over the (k + ln n + D) * max_degree budget."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return stat / ((k + math.log(n) + diameter) * max_degree)


def tail_bounds(kind: str, m: int, p_or_mu: float, alpha: float) -> float:
    """Failure-probability bound for a sum of m i.i.d. waits exceeding
    alpha times its mean.

    kind="geometric" gives (alpha * e^(1-alpha))^m, kind="exponential"
    gives (2 * e^(-alpha/2))^m. The rate argument fixes the time scale
    (mean m / p_or_mu) but cancels out of the bound itself.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if m < 1:
        raise ValueError("m must be >= 1")
    if not p_or_mu > 0:
        raise ValueError("rate must be positive")
    if kind == "geometric":
        if p_or_mu > 1:
            raise ValueError("geometric success probability exceeds 1")
        base = alpha * math.exp(1 - alpha)
    elif kind == "exponential":
        base = 2 * math.exp(-alpha / 2)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    return base ** m


def _run_trial(spec: ExperimentSpec, g, k: int, seed: int) -> StoppingReport:
    if spec.protocol == "uniform_ag":
        return run_uniform_ag(g, k, q=spec.q, time_model=spec.time_model,
                              action=spec.action, seed=seed, cap=spec.cap,
                              engine=spec.engine)
    if spec.protocol == "brr":
        return run_brr_broadcast(g, time_model=spec.time_model, seed=seed,
                                 cap=spec.cap, engine=spec.engine)
    tree = "brr" if spec.protocol == "tag" else "oracle"
    return run_tag(g, k, q=spec.q, time_model=spec.time_model, tree=tree,
                   seed=seed, cap=spec.cap, engine=spec.engine)


def run_experiment(spec: ExperimentSpec) -> "FitReport":
    """Execute the sweep; write CSV rows if requested; return the fit.

    Trials are dispatched to a thread pool sized spec.workers and
    gathered in submission order, so the CSV is identical for any
    worker count.
    """
    all_rows: list[str] = []
    reports: list[StoppingReport] = []
    for n in spec.n_list:
        g = generate(spec.family, n, seed=spec.graph_seed)
        k = resolve_k(spec.k_rule, n)
        trials = spec.trials_for(n)
        seeds = [derive_seed(spec.seed, spec.family, n, i)
                 for i in range(trials)]
        if spec.workers > 1:
            with ThreadPoolExecutor(max_workers=spec.workers) as pool:
                batch = list(pool.map(
                    lambda s: _run_trial(spec, g, k, s), seeds))
        else:
            batch = [_run_trial(spec, g, k, s) for s in seeds]
        reports.extend(batch)
        all_rows.extend(r.csv_row() for r in batch)
    if spec.out_csv:
        write_csv(spec.out_csv, all_rows)
    rows = [r.strip().split(",") for r in all_rows]
    dicts = [dict(zip(protocols.CSV_HEADER.split(","), r)) for r in rows]
    groups = fit_rows(dicts, percentile=spec.percentile,
                      graph_seed=spec.graph_seed, min_sizes=4)
    assert len(groups) == 1
    return groups[0]


def write_csv(path: str, rows: list[str]) -> None:
    """Append data rows, writing the header only for a fresh file."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(protocols.CSV_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


REQUIRED_COLUMNS = tuple(protocols.CSV_HEADER.split(","))


def load_csv(path: str) -> list[dict]:
    """Read trial rows; raises on a missing or mis-labelled schema."""
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValueError(f"CSV {path} lacks columns {missing}")
        return list(reader)


@dataclass(frozen=True)
class FitReport:
    """Per-size statistics plus the log-log scaling fit for one sweep."""

    protocol: str
    family: str
    time_model: str
    action: str
    q: int
    percentile: float
    ns: tuple[int, ...]
    ks: tuple[int, ...]
    trials: tuple[int, ...]
    medians: tuple[float, ...]
    p95s: tuple[float, ...]
    p99s: tuple[float, ...]
    stats: tuple[float, ...]
    ratios: tuple[float, ...]
    capped: int
    slope: float | None = None
    slope_stderr: float | None = None
    slope_ci: tuple[float, float] | None = None

    CSV_HEADER = ("protocol,family,time_model,action,q,n,k,trials,"
                  "median,p95,p99,stat,ratio,slope,slope_lo,slope_hi")

    def csv_rows(self) -> list[str]:
        s = "" if self.slope is None else f"{self.slope:.6g}"
        lo = "" if self.slope_ci is None else f"{self.slope_ci[0]:.6g}"
        hi = "" if self.slope_ci is None else f"{self.slope_ci[1]:.6g}"
        out = []
        for i, n in enumerate(self.ns):
            out.append(
                f"{self.protocol},{self.family},{self.time_model},"
                f"{self.action},{self.q},{n},{self.ks[i]},{self.trials[i]},"
                f"{self.medians[i]:.6g},{self.p95s[i]:.6g},"
                f"{self.p99s[i]:.6g},{self.stats[i]:.6g},"
                f"{self.ratios[i]:.6g},{s},{lo},{hi}")
        return out


def _loglog_fit(ns, stats):
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(stats, dtype=float))
    (slope, _), cov = np.polyfit(x, y, 1, cov=True)
    stderr = float(np.sqrt(cov[0, 0]))
    return float(slope), stderr


def fit_rows(rows: list[dict], percentile: float = 99.0,
             graph_seed: int = 0, min_sizes: int = 4) -> list[FitReport]:
    """Aggregate trial rows into FitReports, one per sweep group.

    Rows are grouped by (protocol, family, time_model, action, q); a
    slope is fitted only when the group spans at least `min_sizes`
    distinct sizes. Graph metrics for the bound ratio are recomputed
    from the named family at `graph_seed`.
    """
    groups: dict[tuple, dict[int, list[dict]]] = {}
    for row in rows:
        key = (row["protocol"], row["family"], row["time_model"],
               row["action"], int(row["q"]))
        groups.setdefault(key, {}).setdefault(int(row["n"]), []).append(row)
    reports = []
    for key, by_n in sorted(groups.items()):
        protocol, family, time_model, action, q = key
        ns = sorted(by_n)
        ks, trials, medians, p95s, p99s, stats, ratios = \
            [], [], [], [], [], [], []
        capped = 0
        for n in ns:
            rws = by_n[n]
            rounds = np.array(sorted(float(r["rounds"]) for r in rws))
            k = int(rws[0]["k"])
            capped += sum(int(r["capped"]) for r in rws)
            g = generate(family, n, seed=graph_seed)
            m = metrics(g)
            stat = float(np.percentile(rounds, percentile))
            ks.append(k)
            trials.append(len(rws))
            medians.append(float(np.percentile(rounds, 50)))
            p95s.append(float(np.percentile(rounds, 95)))
            p99s.append(float(np.percentile(rounds, 99)))
            stats.append(stat)
            ratios.append(bound_ratio(stat, n, k, m.diameter, m.max_degree))
        slope = stderr = ci = None
        if len(ns) >= min_sizes:
            slope, stderr = _loglog_fit(ns, stats)
            ci = (slope - 1.96 * stderr, slope + 1.96 * stderr)
        reports.append(FitReport(
            protocol=protocol, family=family, time_model=time_model,
            action=action, q=q, percentile=percentile, ns=tuple(ns),
            ks=tuple(ks), trials=tuple(trials), medians=tuple(medians),
            p95s=tuple(p95s), p99s=tuple(p99s), stats=tuple(stats),
            ratios=tuple(ratios), capped=capped, slope=slope,
            slope_stderr=stderr, slope_ci=ci))
    return reports


def fit_csv(in_path: str, out_path: str | None = None,
            percentile: float = 99.0, graph_seed: int = 0,
            min_sizes: int = 4) -> list[FitReport]:
    """Fit every sweep group found in a results CSV; optionally write
    the report rows."""
    reports = fit_rows(load_csv(in_path), percentile=percentile,
                       graph_seed=graph_seed, min_sizes=min_sizes)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(FitReport.CSV_HEADER + "\n")
            for rep in reports:
                for row in rep.csv_rows():
                    fh.write(row + "\n")
    return reports


def emit_plots(csv_paths, out_dir: str, graph_seed: int = 0) -> list[str]:
    """Render log-log stopping-time and bound-ratio plots from CSVs.

    One stopping-time figure per (family, time_model) with a series per
    protocol and fitted slopes in the legend, plus one bound-ratio
    figure over all groups. Returns the written file paths; empty
    input produces a warning and no files.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(csv_paths, str):
        csv_paths = [csv_paths]
    rows: list[dict] = []
    for path in csv_paths:
        rows.extend(load_csv(path))
    if not rows:
        warnings.warn("no data rows found; nothing to plot")
        return []
    reports = fit_rows(rows, graph_seed=graph_seed, min_sizes=2)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    by_fig: dict[tuple, list[FitReport]] = {}
    for rep in reports:
        by_fig.setdefault((rep.family, rep.time_model), []).append(rep)
    for (family, time_model), reps in sorted(by_fig.items()):
        fig, ax = plt.subplots(figsize=(5.5, 4))
        for rep in reps:
            label = rep.protocol
            if rep.slope is not None:
                label += f" (slope {rep.slope:.2f})"
            ax.loglog(rep.ns, rep.stats, "o-", label=label)
        ax.set_xlabel("n")
        ax.set_ylabel(f"p{reps[0].percentile:g} stopping rounds")
        ax.set_title(f"{family}, {time_model}")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        path = os.path.join(out_dir, f"stopping_{family}_{time_model}.png")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 4))
    for rep in reports:
        ax.semilogx(rep.ns, rep.ratios, "o-",
                    label=f"{rep.protocol}/{rep.family}/{rep.time_model}")
    ax.set_xlabel("n")
    ax.set_ylabel("stat / ((k + ln n + D) * max degree)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    path = os.path.join(out_dir, "bound_ratio.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
