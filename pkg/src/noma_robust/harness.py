"""Monte-Carlo driver: power sweeps and minimum-SINR distributions to CSV.

Each trial index owns an independent random stream, so every scheme, error
bound and target of a trial sees the same channels.  Trials are farmed out
to worker processes and the rows are sorted before writing, which makes the
files independent of the number of workers.
"""

import csv
import datetime
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .certify import min_achieved_sinr
from .channel import Scenario, db_to_linear, generate_channels, linear_to_db
from .formulation import design
from .sdp import Status

log = logging.getLogger(__name__)

VIOLATION_MARGIN_DB = 0.05
MIN_PDF_BINS = 20
SCAN_CHUNK = 32


@dataclass
class ExperimentConfig:
    scenario: Scenario
    schemes: tuple = ("robust", "nonrobust", "oma")
    gamma_sweep_db: tuple = (10.0,)
    epsilon_list: tuple = (0.06,)
    trials: int = 200
    out_dir: Path = Path("results")
    workers: int = 1
    # count only trials where every cell is optimal, scanning further indices
    feasible_only: bool = False
    max_scan: int = None
    timestamp: bool = True
    # repair relaxations that are not rank one (see formulation.recover_rank_one)
    recover: bool = True

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.gamma_sweep_db = tuple(float(g) for g in self.gamma_sweep_db)
        self.epsilon_list = tuple(float(e) for e in self.epsilon_list)
        self.out_dir = Path(self.out_dir)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (self.schemes and self.gamma_sweep_db and self.epsilon_list):
            raise ValueError("schemes and sweep lists must be nonempty")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_scan is None:
            self.max_scan = 100 * self.trials if self.feasible_only else self.trials

    def cells(self):
        """(scheme, epsilon, gamma_db), hardest first so infeasible trials stop early."""
        out = [(sch, e, g) for e in self.epsilon_list for g in self.gamma_sweep_db
               for sch in self.schemes]
        rank = {"robust": 0, "oma": 1, "nonrobust": 2}
        return sorted(out, key=lambda c: (-c[1], -c[2], rank[c[0]]))


@dataclass
class TrialRecord:
    trial_index: int
    scheme: str
    epsilon: float
    gamma_db: float
    status: str
    total_power_linear: float = math.nan
    total_power_db: float = math.nan
    sdp_power_linear: float = math.nan
    min_achieved_sinr_db: float = math.nan
    rank_ratio_max: float = math.nan
    rank_flag: bool = False
    recovered: bool = False
    solve_iters: int = 0
    solve_ms: float = 0.0

    @property
    def optimal(self):
        return self.status == Status.OPTIMAL.value

    def sort_key(self):
        return (self.trial_index, self.scheme, self.epsilon, self.gamma_db)


# solve time varies between runs, so it goes to a separate file
STABLE_FIELDS = [f.name for f in fields(TrialRecord) if f.name != "solve_ms"]


@dataclass
class CellSummary:
    scheme: str
    epsilon: float
    gamma_db: float
    n_trials: int
    n_optimal: int
    n_infeasible: int
    n_failed: int
    n_rank_flag: int
    n_recovered: int
    mean_power_linear: float
    mean_power_db: float
    median_power_linear: float
    mean_delivered_power_linear: float
    violation_fraction: float


@dataclass
class SummaryStats:
    cells: list
    records: list
    trial_indices: list
    scanned: int
    cdf: dict = field(default_factory=dict)
    pdf: dict = field(default_factory=dict)

    def cell(self, scheme, epsilon, gamma_db):
        for c in self.cells:
            if (c.scheme, c.epsilon, c.gamma_db) == (scheme, float(epsilon), float(gamma_db)):
                return c
        raise KeyError((scheme, epsilon, gamma_db))


# -- statistics -------------------------------------------------------------


def empirical_cdf(values):
    """Right-continuous empirical CDF as ``[(value, P(X <= value)), ...]``."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("need at least one value")
    uniq, counts = np.unique(v, return_counts=True)
    return list(zip(uniq.tolist(), (np.cumsum(counts) / v.size).tolist()))


def histogram(values, min_bins=MIN_PDF_BINS):
    """Freedman-Diaconis histogram with at least ``min_bins`` bins.

    Returns ``(edges, mass, density)``; ``mass`` sums to one.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one value")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.histogram_bin_edges(v, bins="fd", range=(lo, hi))
    if edges.size - 1 < min_bins:
        edges = np.linspace(lo, hi, min_bins + 1)
    counts, edges = np.histogram(v, bins=edges)
    mass = counts / v.size
    return edges, mass, mass / np.diff(edges)


def violation_fraction(records):
    opt = [r for r in records if r.optimal]
    if not opt:
        return math.nan
    bad = sum(r.min_achieved_sinr_db < r.gamma_db - VIOLATION_MARGIN_DB for r in opt)
    return bad / len(opt)


def summarize(records, cfg):
    out = []
    for sch, e, g in sorted(cfg.cells(), key=lambda c: (c[0], c[1], c[2])):
        rs = [r for r in records if (r.scheme, r.epsilon, r.gamma_db) == (sch, e, g)]
        opt = [r for r in rs if r.optimal]
        p = np.array([r.sdp_power_linear for r in opt])
        delivered = np.array([r.total_power_linear for r in opt])
        mean = float(p.mean()) if p.size else math.nan
        out.append(CellSummary(
            scheme=sch, epsilon=e, gamma_db=g, n_trials=len(rs), n_optimal=len(opt),
            n_infeasible=sum(r.status == Status.INFEASIBLE.value for r in rs),
            n_failed=sum(r.status not in (Status.OPTIMAL.value, Status.INFEASIBLE.value)
                         for r in rs),
            n_rank_flag=sum(r.rank_flag for r in opt),
            n_recovered=sum(r.recovered for r in opt),
            mean_power_linear=mean,
            mean_power_db=float(linear_to_db(mean)) if p.size else math.nan,
            median_power_linear=float(np.median(p)) if p.size else math.nan,
            mean_delivered_power_linear=float(delivered.mean()) if p.size else math.nan,
            violation_fraction=violation_fraction(rs)))
    return out


# -- trial evaluation -------------------------------------------------------


def _record(trial, scheme, eps, gamma_db, d, cs, s):
    r = TrialRecord(trial, scheme, eps, gamma_db, d.status.value,
                    solve_iters=d.iterations, solve_ms=d.solve_ms)
    if d.solved:
        r.total_power_linear = d.total_power
        r.total_power_db = float(linear_to_db(d.total_power))
        r.sdp_power_linear = d.objective
        r.min_achieved_sinr_db = float(linear_to_db(min_achieved_sinr(d, cs, s)))
        r.rank_ratio_max = d.max_rank_ratio
        r.rank_flag = bool(d.rank_flag)
        r.recovered = bool(d.recovered)
    return r


def run_trial(cfg, trial):
    """All cells of one trial: ``(records, every_cell_optimal)``.

    With ``cfg.feasible_only`` evaluation stops at the first non-optimal cell.
    """
    base = cfg.scenario
    cache = {}
    channels = {}
    records = []
    ok = True
    for scheme, eps, gamma_db in cfg.cells():
        s = replace(base, epsilon=eps, gamma_min=float(db_to_linear(gamma_db)))
        if eps not in channels:
            channels[eps] = generate_channels(s, trial)
        cs = channels[eps]
        # the non-robust design ignores the error bound, so reuse it across bounds
        key = (scheme, None if scheme == "nonrobust" else eps, gamma_db)
        if key not in cache:
            cache[key] = design(s, cs, scheme, recover=cfg.recover)
        d = cache[key]
        records.append(_record(trial, scheme, eps, gamma_db, d, cs, s))
        if not d.solved:
            ok = False
            if cfg.feasible_only:
                break
    return records, ok


def _worker(args):
    cfg, trial = args
    with threadpool_limits(limits=1):
        return trial, run_trial(cfg, trial)


def run_trials(cfg):
    """Evaluate trials, scanning indices in fixed chunks when ``feasible_only``.

    Returns ``(records, kept_trial_indices, scanned)``.  The kept trials are
    the first ``cfg.trials`` by index, so the choice does not depend on the
    number of workers.
    """
    kept = []
    results = {}
    scanned = 0
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        while len(kept) < cfg.trials and scanned < cfg.max_scan:
            if cfg.feasible_only:
                stop = min(scanned + SCAN_CHUNK, cfg.max_scan)
            else:
                stop = min(cfg.trials, cfg.max_scan)
            jobs = [(cfg, t) for t in range(scanned, stop)]
            if pool is None:
                out = map(_worker, jobs)
            else:
                out = pool.map(_worker, jobs)
            for trial, (records, ok) in out:
                if ok or not cfg.feasible_only:
                    results[trial] = records
            scanned = stop
            kept = sorted(results)[: cfg.trials]
            log.info("scanned %d trials, kept %d", scanned, len(kept))
    finally:
        if pool is not None:
            pool.shutdown()
    if len(kept) < cfg.trials:
        log.warning("only %d of %d requested trials kept after scanning %d",
                    len(kept), cfg.trials, scanned)
    records = sorted((r for t in kept for r in results[t]), key=TrialRecord.sort_key)
    return records, kept, scanned


# -- output -----------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path, header, rows, timestamp=False):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if timestamp:
            now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
            fh.write(f"# generated {now}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _prepare_out_dir(out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    probe.write_text("")
    probe.unlink()


def _write_records(cfg, records, name):
    write_csv(cfg.out_dir / name, STABLE_FIELDS,
              ([getattr(r, f) for f in STABLE_FIELDS] for r in records), cfg.timestamp)
    write_csv(cfg.out_dir / "timing.csv", ["trial_index", "scheme", "epsilon", "gamma_db",
                                          "solve_ms"],
              ([r.trial_index, r.scheme, r.epsilon, r.gamma_db, r.solve_ms] for r in records),
              cfg.timestamp)


def _write_summary(cfg, cells):
    header = [f.name for f in fields(CellSummary)]
    write_csv(cfg.out_dir / "power_summary.csv", header,
              ([getattr(c, h) for h in header] for c in cells), cfg.timestamp)


def run_power_sweep(cfg):
    """Power of every scheme over the error-bound and target grid.

    Writes ``power_sweep.csv`` (one row per trial and cell) and
    ``power_summary.csv``.
    """
    _prepare_out_dir(cfg.out_dir)
    records, kept, scanned = run_trials(cfg)
    cells = summarize(records, cfg)
    _write_records(cfg, records, "power_sweep.csv")
    _write_summary(cfg, cells)
    return SummaryStats(cells, records, kept, scanned)


def run_sinr_distribution(cfg):
    """Distribution of the per-trial minimum achieved SINR at the true channels.

    Writes ``sinr_cdf.csv`` and ``sinr_pdf.csv`` (values in dB, optimal
    trials only), plus the per-trial rows in ``sinr_trials.csv`` and the
    cell summary in ``power_summary.csv``.
    """
    _prepare_out_dir(cfg.out_dir)
    records, kept, scanned = run_trials(cfg)
    cells = summarize(records, cfg)
    stats = SummaryStats(cells, records, kept, scanned)
    cdf_rows, pdf_rows = [], []
    for c in cells:
        vals = [r.min_achieved_sinr_db for r in records if r.optimal
                and (r.scheme, r.epsilon, r.gamma_db) == (c.scheme, c.epsilon, c.gamma_db)]
        if not vals:
            continue
        key = (c.scheme, c.epsilon, c.gamma_db)
        stats.cdf[key] = empirical_cdf(vals)
        stats.pdf[key] = histogram(vals)
        cdf_rows += [[*key, v, p] for v, p in stats.cdf[key]]
        edges, mass, dens = stats.pdf[key]
        pdf_rows += [[*key, edges[i], edges[i + 1], mass[i], dens[i]] for i in range(mass.size)]
    _write_records(cfg, records, "sinr_trials.csv")
    _write_summary(cfg, cells)
    write_csv(cfg.out_dir / "sinr_cdf.csv",
              ["scheme", "epsilon", "gamma_db", "min_sinr_db", "cdf"], cdf_rows, cfg.timestamp)
    write_csv(cfg.out_dir / "sinr_pdf.csv",
              ["scheme", "epsilon", "gamma_db", "bin_lo_db", "bin_hi_db", "mass", "density"],
              pdf_rows, cfg.timestamp)
    return stats

