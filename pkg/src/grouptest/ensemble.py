"""Best-of-R search over random constant-weight codes.

Every trial draws a code whose ``t`` columns are independent and uniform
over the ``C(N, w)`` weight-``w`` columns of length ``N``, evaluates it
exactly, and the code with the smallest maximal error is kept.  Each trial
has its own random substream keyed by ``(seed, rule, N, t, w, trial)``, so
results do not depend on chunking or on the number of worker threads, and
running more trials only adds candidates.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codes import BinaryCode, write_code
from .evaluation import (
    LATTICE_CAP,
    ROWSPACE_CAP,
    ErrorPair,
    Prior,
    _disjunctive_rates,
    _threshold_rates,
    batch_disjunctive_counts,
    batch_profiles,
    binomial_prior,
    disjunctive_errors,
    monte_carlo_threshold_curve,
    threshold_errors,
)
from .exceptions import EnumerationCapError, GroupTestingError

__all__ = [
    "GENERATOR_ID",
    "RULES",
    "EnsembleConfig",
    "WeightBest",
    "SearchReport",
    "trial_rng",
    "sample_constant_weight_code",
    "best_code_search",
    "Table2Row",
    "table2_experiment",
    "table2_csv",
    "save_report",
]

RULES = ("threshold", "disjunctive")
_RULE_IDS = {"threshold": 0, "disjunctive": 1}
GENERATOR_ID = "numpy-PCG64/SeedSequence(seed, spawn_key=(rule, N, t, w, trial))"

# cells (subsets or row sets) per batched profile evaluation
_BATCH_CELLS = 1 << 22


@dataclass(frozen=True)
class EnsembleConfig:
    N: int
    t: int
    s: int
    weights: tuple[int, ...] | None = None
    trials: int = 1000
    seed: int = 0
    rule: str = "threshold"
    prior: Prior | None = None
    #: per-hypothesis sample count used when exact enumeration is refused
    mc_samples: int | None = None
    threads: int = 1

    def __post_init__(self):
        if not 1 <= self.s < self.t:
            raise GroupTestingError(f"need 1 <= s < t, got s={self.s}, t={self.t}")
        if self.N < 2:
            raise GroupTestingError(f"need N >= 2, got {self.N}")
        if self.trials < 1:
            raise GroupTestingError("trials must be >= 1")
        if self.rule not in RULES:
            raise GroupTestingError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if not 0 <= self.seed < 2**64:
            raise GroupTestingError("seed must be a 64-bit unsigned integer")
        weights = tuple(range(1, self.N)) if self.weights is None else tuple(self.weights)
        if not weights:
            raise GroupTestingError("no candidate weights")
        for w in weights:
            if not 1 <= w < self.N:
                raise GroupTestingError(f"weight {w} outside [1, N-1] for N={self.N}")
        object.__setattr__(self, "weights", weights)
        if self.prior is None:
            object.__setattr__(self, "prior", binomial_prior(self.t, self.s))
        elif self.prior.t != self.t:
            raise GroupTestingError(f"prior has t={self.prior.t}, config has t={self.t}")


@dataclass(frozen=True)
class WeightBest:
    """Best code found for one weight."""

    w: int
    trial: int
    T: int | None
    errors: ErrorPair
    code: BinaryCode


@dataclass(frozen=True)
class SearchReport:
    best_code: BinaryCode
    best_w: int
    best_T: int | None
    best_trial: int
    errors: ErrorPair
    trials_evaluated: int
    seed: int
    rule: str
    per_weight: dict[int, WeightBest] = field(default_factory=dict)
    generator: str = GENERATOR_ID
    exact: bool = True

    @property
    def max_error(self) -> float:
        return self.errors.max_error


def trial_rng(seed: int, rule: str, N: int, t: int, w: int, trial: int) -> np.random.Generator:
    key = (_RULE_IDS[rule], N, t, w, trial)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _sample_masks(N: int, t: int, w: int, rng: np.random.Generator) -> list[int]:
    rows = np.argsort(rng.random((t, N)), axis=1)[:, :w]
    return [sum(1 << int(i) for i in r) for r in rows]


def sample_constant_weight_code(N: int, t: int, w: int, rng: np.random.Generator) -> BinaryCode:
    """Code with ``t`` i.i.d. columns, each uniform over weight-``w`` columns of length ``N``."""
    if not 1 <= w < N:
        raise GroupTestingError(f"weight must satisfy 1 <= w < N, got w={w}, N={N}")
    return BinaryCode(_sample_masks(N, t, w, rng), N, declared_weight=w)


def _better(a: tuple, b: tuple | None) -> bool:
    return b is None or a < b


def _chunk_size(cfg: EnsembleConfig) -> int:
    if cfg.rule == "disjunctive":
        n_sub = sum(math.comb(cfg.t, k) for k in range(cfg.s + 1))
        cells = n_sub * cfg.t
    else:
        cells = min(1 << cfg.t, (1 << cfg.N) * 2) if cfg.t <= 24 else 1 << cfg.N
    return int(min(max(1, _BATCH_CELLS // max(cells, 1)), 512))


def _search_weight_exact(cfg: EnsembleConfig, w: int) -> WeightBest:
    best = None      # (value, T, trial)
    best_pair = None
    best_masks = None
    B = _chunk_size(cfg)
    for start in range(0, cfg.trials, B):
        trials = range(start, min(start + B, cfg.trials))
        masks = np.array(
            [_sample_masks(cfg.N, cfg.t, w, trial_rng(cfg.seed, cfg.rule, cfg.N, cfg.t, w, i))
             for i in trials],
            dtype=np.int64,
        )
        if cfg.rule == "threshold":
            counts = batch_profiles(masks, cfg.N)
            alpha, beta = _threshold_rates(counts, cfg.s, cfg.prior)
            mx = np.maximum(alpha, beta)
            m = mx.min()
            # smallest T first, then earliest trial
            T_idx = int(np.flatnonzero((mx == m).any(axis=0))[0])
            b = int(np.flatnonzero(mx[:, T_idx] == m)[0])
            cand = (float(m), T_idx + 1, start + b)
            pair = ErrorPair(float(alpha[b, T_idx]), float(beta[b, T_idx]))
        else:
            counts = batch_disjunctive_counts(masks, cfg.s)
            alpha = _disjunctive_rates(counts, cfg.t, cfg.s, cfg.prior)
            b = int(np.argmin(alpha))
            cand = (float(alpha[b]), 0, start + b)
            pair = ErrorPair(float(alpha[b]), 0.0)
        if _better(cand, best):
            best, best_pair, best_masks = cand, pair, masks[b].tolist()
    code = BinaryCode(best_masks, cfg.N, declared_weight=w)
    T = best[1] if cfg.rule == "threshold" else None
    return WeightBest(w, best[2], T, best_pair, code)


def _search_weight_mc(cfg: EnsembleConfig, w: int) -> WeightBest:
    if cfg.rule != "threshold":
        raise GroupTestingError("Monte-Carlo search is implemented for the threshold rule only")
    best = None
    for i in range(cfg.trials):
        rng = trial_rng(cfg.seed, cfg.rule, cfg.N, cfg.t, w, i)
        code = BinaryCode(_sample_masks(cfg.N, cfg.t, w, rng), cfg.N, declared_weight=w)
        alpha, beta = monte_carlo_threshold_curve(code, cfg.s, cfg.prior, cfg.mc_samples, rng)
        mx = np.maximum(alpha, beta)
        T_idx = int(np.argmin(mx))
        cand = (float(mx[T_idx]), T_idx + 1, i)
        if _better(cand, best):
            n = cfg.mc_samples
            a, bta = float(alpha[T_idx]), float(beta[T_idx])
            pair = ErrorPair(a, bta, math.sqrt(a * (1 - a) / n), math.sqrt(bta * (1 - bta) / n))
            best, best_entry = cand, (pair, code)
    pair, code = best_entry
    return WeightBest(w, best[2], best[1], pair, code)


def _needs_mc(cfg: EnsembleConfig) -> bool:
    if cfg.rule == "disjunctive":
        return False
    return not ((cfg.t <= LATTICE_CAP and cfg.N <= 63) or cfg.N <= ROWSPACE_CAP)


def best_code_search(cfg: EnsembleConfig) -> SearchReport:
    """Best code over ``cfg.trials`` draws for each weight, and overall.

    Ties are broken by smaller weight, then smaller threshold, then earlier
    trial.
    """
    mc = _needs_mc(cfg)
    if mc and cfg.mc_samples is None:
        raise EnumerationCapError(
            f"N={cfg.N}, t={cfg.t} is beyond exact enumeration; set mc_samples to search "
            "with Monte-Carlo evaluation"
        )
    search = _search_weight_mc if mc else _search_weight_exact
    if cfg.threads > 1 and len(cfg.weights) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda w: search(cfg, w), cfg.weights))
    else:
        results = [search(cfg, w) for w in cfg.weights]
    per_weight = {r.w: r for r in results}
    overall = min(
        results, key=lambda r: (r.errors.max_error, r.w, r.T or 0, r.trial)
    )
    return SearchReport(
        best_code=overall.code,
        best_w=overall.w,
        best_T=overall.T,
        best_trial=overall.trial,
        errors=overall.errors,
        trials_evaluated=cfg.trials * len(cfg.weights),
        seed=cfg.seed,
        rule=cfg.rule,
        per_weight=per_weight,
        exact=not mc,
    )


def reevaluate(report: SearchReport, s: int, prior: Prior) -> ErrorPair:
    """Fresh exact evaluation of the reported best code."""
    if report.rule == "threshold":
        return threshold_errors(report.best_code, s, report.best_T, prior)
    return disjunctive_errors(report.best_code, s, prior)


# -- simulation table ---------------------------------------------------------


@dataclass(frozen=True)
class Table2Row:
    N: int
    rule: str
    alpha: float
    beta: float
    w: int
    T: int | None
    winner: str


TABLE2_HEADER = ["N", "rule", "alpha", "beta", "w", "T", "winner"]


def table2_experiment(
    s: int,
    t: int,
    N_list,
    trials: int = 1000,
    seed: int = 0,
    rules=RULES,
    weights=None,
    prior: Prior | None = None,
    threads: int = 1,
    mc_samples: int | None = None,
) -> tuple[list[Table2Row], dict[tuple[int, str], SearchReport]]:
    """Run the best-code search for every ``N`` and rule.

    ``winner`` names the rule with the smaller maximal error at that ``N``
    ("tie" if equal, empty if only one rule ran).  ``weights`` may be a
    callable ``N -> iterable`` or None for all of 1..N-1.
    """
    rows: list[Table2Row] = []
    reports: dict[tuple[int, str], SearchReport] = {}
    for N in N_list:
        ws = weights(N) if callable(weights) else weights
        for rule in rules:
            cfg = EnsembleConfig(
                N=N, t=t, s=s, weights=None if ws is None else tuple(ws), trials=trials,
                seed=seed, rule=rule, prior=prior, threads=threads, mc_samples=mc_samples,
            )
            reports[(N, rule)] = best_code_search(cfg)
        if len(rules) == 2:
            a, b = (reports[(N, r)].max_error for r in rules)
            winner = rules[0] if a < b else rules[1] if b < a else "tie"
        else:
            winner = ""
        for rule in rules:
            r = reports[(N, rule)]
            rows.append(Table2Row(N, rule, r.errors.alpha, r.errors.beta, r.best_w, r.best_T, winner))
    return rows, reports


def table2_csv(rows: list[Table2Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE2_HEADER)
    for r in rows:
        writer.writerow(
            [r.N, r.rule, repr(r.alpha), repr(r.beta), r.w, "" if r.T is None else r.T, r.winner]
        )
    return buf.getvalue()


def save_report(report: SearchReport, directory: str | os.PathLike, stem: str, s: int) -> Path:
    """Write the best code in the text code format plus a JSON sidecar; returns the code path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    code_path = directory / f"{stem}.code"
    write_code(report.best_code, code_path)
    meta = {
        "N": report.best_code.length,
        "t": report.best_code.size,
        "s": s,
        "rule": report.rule,
        "w": report.best_w,
        "T": report.best_T,
        "trial": report.best_trial,
        "seed": report.seed,
        "generator": report.generator,
        "alpha": report.errors.alpha,
        "beta": report.errors.beta,
        "max_error": report.max_error,
        "exact": report.exact,
        "trials_evaluated": report.trials_evaluated,
    }
    with open(directory / f"{stem}.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code_path
