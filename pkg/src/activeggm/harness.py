"""Benchmark harness: active, passive and random-missing estimation at
matched scalar budgets, aggregated over seeded trials."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .active import ActiveState, EstimatorConfig, RowStream, algorithm1, estimate
from .graph import metrics
from .model import model_from_config
from .modelsel import default_tau_grid

logger = logging.getLogger(__name__)

METHODS = ("active", "nonactive", "random")
RECORD_FIELDS = ("method", "trial", "seed", "n", "p", "q", "scalar_used", "tpr", "fdr", "ed")
AGGREGATE_FIELDS = ("method", "metric", "mean", "se")
SWEEP_FIELDS = ("q", "method", "ed_mean", "ed_se")


@dataclass
class ExperimentConfig:
    """One experimental condition.

    ``generator`` is a model config such as ``{"kind": "cluster", "p": 100}``.
    The scalar budget is always ``n * p``.  With ``fixed_model`` every trial
    uses the model built from ``seed``; otherwise each trial draws its own.
    """

    generator: dict
    n: int
    trials: int = 1
    seed: int = 0
    methods: tuple = METHODS
    selection: str = "oracle"
    rounds: int = 5
    delta: float = 0.5
    kappa_active: int = 1
    kappa_final: int = 2
    l: int = 30
    alpha_plus: float = 0.1
    alpha_minus: float = 1.0
    gamma: float = 0.5
    tau_points: int = 20
    tau_selection: str = "replicate"
    bracket_selection: str = "ebic"
    bracket_gamma: Optional[float] = None
    fixed_model: bool = False
    threads: int = 1

    def __post_init__(self):
        self.methods = tuple(self.methods)
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")
        if self.selection not in ("oracle", "ebic"):
            raise ValueError("selection must be 'oracle' or 'ebic'")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["methods"] = list(self.methods)
        return out

    def estimator(self, truth=None) -> EstimatorConfig:
        return EstimatorConfig(
            kappa_active=self.kappa_active, kappa_final=self.kappa_final, l=self.l,
            alpha_plus=self.alpha_plus, alpha_minus=self.alpha_minus,
            tau_grid=default_tau_grid(self.tau_points), gamma=self.gamma,
            selection=self.selection, tau_selection=self.tau_selection, truth=truth,
            bracket_selection=self.bracket_selection, bracket_gamma=self.bracket_gamma)


@dataclass(frozen=True)
class ExperimentRecord:
    method: str
    trial: int
    seed: int
    n: int
    p: int
    q: int
    scalar_used: int
    tpr: float
    fdr: float
    ed: float

    def row(self) -> tuple:
        return tuple(getattr(self, f) for f in RECORD_FIELDS)


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1, np.uint64)[0] >> 1)


def random_missing(full: np.ndarray, n_missing: int, rng) -> np.ndarray:
    """Copy of ``full`` with ``n_missing`` cells chosen uniformly set to NaN."""
    out = np.array(full, dtype=float, copy=True)
    cells = rng.choice(out.size, size=n_missing, replace=False)
    out.flat[cells] = np.nan
    return out


def run_trial(cfg: ExperimentConfig, trial: int) -> list:
    """Records for every requested method on one seeded trial.

    All methods read the same stream of rows.  The random arm uses as many
    rows as the active arm measured, with the same number of missing cells
    scattered uniformly.
    """
    seed = trial_seed(cfg.seed, trial)
    model_ss, stream_ss, active_ss, random_ss = np.random.SeedSequence(seed).spawn(4)
    if cfg.fixed_model:
        model_ss = np.random.SeedSequence(cfg.seed)
    model = model_from_config(cfg.generator, rng=np.random.default_rng(model_ss))
    p, truth = model.p, model.graph
    q = cfg.n * p
    est = cfg.estimator(truth)
    stream = RowStream(model, np.random.default_rng(stream_ss))
    oracle = cfg.selection == "oracle"
    records = []

    def record(method, graph, used):
        tpr, fdr, ed = metrics(graph, truth) if graph is not None else (math.nan,) * 3
        records.append(ExperimentRecord(method, trial, seed, cfg.n, p, q, int(used),
                                        float(tpr), float(fdr), float(ed)))

    ledger = None
    if "active" in cfg.methods or "random" in cfg.methods:
        try:
            g, ledger = algorithm1(stream.reader(), ActiveState.initial(p), q, cfg.rounds,
                                   cfg.delta, est, np.random.default_rng(active_ss), p=p)
            if "active" in cfg.methods:
                record("active", g, ledger.scalar_count)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.error("trial %d: active arm failed: %s", trial, exc)
            if "active" in cfg.methods:
                record("active", None, 0)
    if "nonactive" in cfg.methods:
        try:
            g, _ = estimate(stream.rows(0, cfg.n), range(p), p, cfg.kappa_final, est,
                            oracle=oracle)
            record("nonactive", g, q)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.error("trial %d: nonactive arm failed: %s", trial, exc)
            record("nonactive", None, q)
    if "random" in cfg.methods:
        if ledger is None or ledger.n_rows == 0:
            record("random", None, 0)
        else:
            n_bar = ledger.n_rows
            used = ledger.scalar_count
            x = random_missing(stream.rows(0, n_bar), n_bar * p - used,
                               np.random.default_rng(random_ss))
            try:
                g, _ = estimate(x, range(p), p, cfg.kappa_final, est, oracle=oracle)
                record("random", g, used)
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                logger.error("trial %d: random arm failed: %s", trial, exc)
                record("random", None, used)
    return records


def _run_trials(cfg: ExperimentConfig) -> list:
    trials = range(cfg.trials)
    if cfg.threads > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            chunks = list(pool.map(run_trial, [cfg] * cfg.trials, trials))
    else:
        chunks = [run_trial(cfg, t) for t in trials]
    return [r for chunk in chunks for r in chunk]


def mean_se(values) -> tuple:
    """Mean and standard error (sample sd over sqrt(count)); NaNs are dropped."""
    v = np.asarray([x for x in values if not math.isnan(x)], dtype=float)
    if not len(v):
        return math.nan, math.nan
    if len(v) == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def aggregate(records: list, methods=METHODS) -> list:
    """``(method, metric, mean, se)`` rows in method order."""
    out = []
    for method in methods:
        mine = [r for r in records if r.method == method]
        if not mine:
            continue
        for metric in ("tpr", "fdr", "ed", "scalar_used"):
            m, se = mean_se([float(getattr(r, metric)) for r in mine])
            out.append((method, metric, m, se))
    return out


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    table: list = field(default_factory=list)

    def summary(self, method: str, metric: str = "ed") -> tuple:
        for m, k, mean, se in self.table:
            if m == method and k == metric:
                return mean, se
        raise KeyError((method, metric))


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    records = _run_trials(cfg)
    return ExperimentResult(cfg, records, aggregate(records, cfg.methods))


def budget_sweep(cfg: ExperimentConfig, q_list) -> list:
    """``(q, method, ed_mean, ed_se)`` rows, one experiment per budget.

    Each budget is converted to ``n = q // p`` rows; the reported ``q`` is
    ``n * p``.
    """
    q_list = list(q_list)
    if any(b <= a for a, b in zip(q_list, q_list[1:])):
        raise ValueError("budgets must be strictly ascending")
    p = model_from_config(cfg.generator, rng=np.random.default_rng(cfg.seed)).p
    rows = []
    for q in q_list:
        n = q // p
        if n < 1:
            raise ValueError(f"budget {q} is smaller than one row ({p} scalars)")
        res = run_experiment(dataclasses.replace(cfg, n=n))
        for method in cfg.methods:
            m, se = res.summary(method, "ed")
            rows.append((n * p, method, m, se))
    return rows


# -- CSV output -------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if not math.isnan(v) else "nan"
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def records_csv(records) -> str:
    return to_csv(RECORD_FIELDS, [r.row() for r in records])


def aggregate_csv(table) -> str:
    return to_csv(AGGREGATE_FIELDS, table)


def sweep_csv(rows) -> str:
    return to_csv(SWEEP_FIELDS, rows)


def read_records(text: str) -> list:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(ExperimentRecord(
            row["method"], int(row["trial"]), int(row["seed"]), int(row["n"]), int(row["p"]),
            int(row["q"]), int(row["scalar_used"]), float(row["tpr"]), float(row["fdr"]),
            float(row["ed"])))
    return out


def pooled_se(a: tuple, b: tuple) -> float:
    """Standard error of a difference of two independent means."""
    return math.sqrt(a[1] ** 2 + b[1] ** 2)


def default_config(kind: str = "cluster", p: int = 100, n: Optional[int] = None, **kw):
    """Convenience constructor with the generator defaults used in the demos."""
    gen = {"kind": kind, "p": p}
    if kind in ("chain", "hub"):
        gen["p1"] = kw.pop("p1", p // 5)
    return ExperimentConfig(gen, n if n is not None else p, **kw)
