"""Error probabilities of the threshold and disjunctive rules under a prior on |S|.

The prior ``p = (p_0, ..., p_t)`` gives the distribution of the number of
defectives; given the size ``k``, the defective set is uniform over the
``C(t, k)`` subsets.  Exact evaluation works from an :class:`OrWeightProfile`,
the table of how many k-subsets have a response vector of each weight.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .codes import BinaryCode, _k_subsets_or
from .exceptions import DegeneratePriorError, EnumerationCapError, GroupTestingError

__all__ = [
    "Prior",
    "binomial_prior",
    "uniform_prior",
    "read_prior",
    "OrWeightProfile",
    "or_weight_profile",
    "ErrorPair",
    "threshold_errors",
    "threshold_error_curve",
    "disjunctive_errors",
    "max_error",
    "monte_carlo_errors",
    "LATTICE_CAP",
    "ROWSPACE_CAP",
]

#: largest t for which all 2**t subsets are enumerated directly
LATTICE_CAP = 24
#: largest N for which the row-space transform (2**N cells) is used
ROWSPACE_CAP = 22
#: largest number of subsets of size <= s enumerated by the disjunctive rule
DISJUNCTIVE_CAP = 5_000_000

_PRIOR_ATOL = 1e-12


# -- priors -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Prior:
    """Probability vector over the number of defective elements, indexed 0..t."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 3:
            raise GroupTestingError("prior must be a vector of length t + 1 >= 3")
        if (p < 0).any() or not np.isfinite(p).all():
            raise GroupTestingError("prior entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > _PRIOR_ATOL:
            raise GroupTestingError(f"prior sums to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, values) -> "Prior":
        p = np.asarray(values, dtype=float)
        total = p.sum()
        if total <= 0:
            raise GroupTestingError("prior has no mass")
        return cls(p / total)

    @property
    def t(self) -> int:
        return self.probs.size - 1

    def conditional(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Conditional size distributions given H0 (k <= s) and H1 (k > s)."""
        if not 0 <= s < self.t:
            raise GroupTestingError(f"s={s} outside [0, t) for t={self.t}")
        p0 = self.probs[: s + 1]
        p1 = self.probs[s + 1 :]
        m0, m1 = p0.sum(), p1.sum()
        if m0 <= 0 or m1 <= 0:
            side = "H0 (|S| <= s)" if m0 <= 0 else "H1 (|S| > s)"
            raise DegeneratePriorError(f"prior puts no mass on {side} for s={s}")
        return p0 / m0, p1 / m1

    def __eq__(self, other):
        return isinstance(other, Prior) and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"Prior(t={self.t})"


def binomial_prior(t: int, s: int) -> Prior:
    """Binomial size distribution with mean ``s + 1/2``."""
    if not 1 <= s < t:
        raise GroupTestingError(f"binomial prior needs 1 <= s < t, got s={s}, t={t}")
    p = (s + 0.5) / t
    if t <= 60:
        probs = [math.comb(t, k) * p**k * (1 - p) ** (t - k) for k in range(t + 1)]
    else:
        lp, lq = math.log(p), math.log1p(-p)
        lgt = math.lgamma(t + 1)
        probs = [
            math.exp(lgt - math.lgamma(k + 1) - math.lgamma(t - k + 1) + k * lp + (t - k) * lq)
            for k in range(t + 1)
        ]
    return Prior(np.asarray(probs) / math.fsum(probs))


def uniform_prior(t: int) -> Prior:
    return Prior(np.full(t + 1, 1.0 / (t + 1)))


def read_prior(path: str | os.PathLike, t: int) -> Prior:
    """Read ``t + 1`` whitespace-separated reals, normalizing with a warning if needed."""
    with open(path, encoding="utf-8") as fh:
        try:
            values = [float(tok) for tok in fh.read().split()]
        except ValueError as exc:
            raise GroupTestingError(f"prior file {path}: {exc}") from exc
    if len(values) != t + 1:
        raise GroupTestingError(f"prior file {path} has {len(values)} values, expected {t + 1}")
    total = math.fsum(values)
    if abs(total - 1.0) > 1e-9:
        warnings.warn(f"prior in {path} sums to {total!r}; normalizing", stacklevel=2)
    return Prior.normalized(values)


# -- OR-weight profiles -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrWeightProfile:
    """``counts[k, w]`` = number of k-subsets whose response vector has weight w."""

    counts: np.ndarray

    @property
    def t(self) -> int:
        return self.counts.shape[0] - 1

    @property
    def N(self) -> int:
        return self.counts.shape[1] - 1

    def __eq__(self, other):
        return isinstance(other, OrWeightProfile) and np.array_equal(self.counts, other.counts)


def _comb_matrix(n_max: int, k_max: int, dtype=np.int64) -> np.ndarray:
    return np.array(
        [[math.comb(n, k) for k in range(k_max + 1)] for n in range(n_max + 1)], dtype=dtype
    )


def _popcounts(n_bits: int, dtype=np.int64) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << n_bits, dtype=np.uint64)).astype(dtype)


def _lattice_profiles(masks: np.ndarray, N: int, t: int) -> np.ndarray:
    """Enumerate every subset: the ORs of subsets of the first j+1 columns are
    the ORs of the first j columns, with and without column j."""
    B = masks.shape[0]
    M = 1 << t
    ors = np.zeros((B, M), dtype=np.uint64)
    cols = masks.astype(np.uint64)
    for j in range(t):
        half = 1 << j
        np.bitwise_or(ors[:, :half], cols[:, j : j + 1], out=ors[:, half : 2 * half])
    weights = np.bitwise_count(ors).astype(np.int64)
    keys = _popcounts(t)[None, :] * (N + 1) + weights
    keys += (np.arange(B, dtype=np.int64) * ((t + 1) * (N + 1)))[:, None]
    counts = np.bincount(keys.ravel(), minlength=B * (t + 1) * (N + 1))
    return counts.reshape(B, t + 1, N + 1)


def _rowspace_profiles(masks: np.ndarray, N: int, t: int) -> np.ndarray:
    """Count through the test sets instead of the element subsets.

    For each row set A, n(A) = #columns supported inside A, and C(n(A), k)
    k-subsets have OR inside A.  Summing over |A| = j and inverting the
    binomial transform in j gives the counts of OR weight exactly w.
    """
    B = masks.shape[0]
    M = 1 << N
    dtype = np.uint8 if t < 256 else np.uint16 if t < 65536 else np.uint32
    flat = (np.arange(B, dtype=np.int64)[:, None] * M + masks).ravel()
    inside = np.bincount(flat, minlength=B * M).astype(dtype).reshape(B, M)
    for i in range(N):
        view = inside.reshape(B, -1, 2, 1 << i)
        view[:, :, 1, :] += view[:, :, 0, :]
    keys = _popcounts(N)[None, :] * (t + 1) + inside
    keys += (np.arange(B, dtype=np.int64) * ((N + 1) * (t + 1)))[:, None]
    hist = np.bincount(keys.ravel(), minlength=B * (N + 1) * (t + 1)).reshape(B, N + 1, t + 1)

    # F[j, k] <= C(N, j) C(t, k); inversion multiplies by up to C(N, N/2).
    bound = math.comb(N, N // 2) ** 2 * math.comb(t, t // 2)
    exact_int64 = bound < 2**62
    dtype = np.int64 if exact_int64 else object
    comb_nk = _comb_matrix(t, t, dtype)
    inv = np.array(
        [
            [(-1) ** (w - j) * math.comb(N - j, w - j) if j <= w else 0 for j in range(N + 1)]
            for w in range(N + 1)
        ],
        dtype=dtype,
    )
    hist = hist.astype(dtype)
    out = np.empty((B, t + 1, N + 1), dtype=dtype)
    for b in range(B):
        F = hist[b] @ comb_nk          # (j, k)
        out[b] = (inv @ F).T           # (k, w)
    return out


def _python_profile(masks: tuple[int, ...], N: int) -> np.ndarray:
    t = len(masks)
    counts = [[0] * (N + 1) for _ in range(t + 1)]

    def rec(j: int, acc: int, size: int):
        if j == t:
            counts[size][acc.bit_count()] += 1
            return
        rec(j + 1, acc, size)
        rec(j + 1, acc | masks[j], size + 1)

    rec(0, 0, 0)
    return np.array(counts, dtype=object if N > 62 else np.int64)


def _choose_method(N: int, t: int, lattice_cap: int, rowspace_cap: int) -> str:
    lattice_ok = t <= lattice_cap and N <= 63
    rowspace_ok = N <= rowspace_cap
    if lattice_ok and rowspace_ok:
        # cost ~ 2**t word ops versus N passes over 2**N byte cells
        return "rowspace" if N * (1 << N) <= 4 * (1 << t) else "lattice"
    if lattice_ok:
        return "lattice"
    if rowspace_ok:
        return "rowspace"
    raise EnumerationCapError(
        f"exact enumeration refused for N={N}, t={t} (caps t <= {lattice_cap} or "
        f"N <= {rowspace_cap}); use monte_carlo_errors instead"
    )


def batch_profiles(
    masks: np.ndarray,
    N: int,
    method: str = "auto",
    lattice_cap: int = LATTICE_CAP,
    rowspace_cap: int = ROWSPACE_CAP,
) -> np.ndarray:
    """Profiles of a batch of codes given as a ``(B, t)`` array of column masks.

    Returns an integer array of shape ``(B, t + 1, N + 1)``.
    """
    masks = np.asarray(masks, dtype=np.int64)
    t = masks.shape[1]
    if method == "auto":
        method = _choose_method(N, t, lattice_cap, rowspace_cap)
    if method == "lattice":
        if t > lattice_cap:
            raise EnumerationCapError(f"t={t} exceeds lattice cap {lattice_cap}")
        return _lattice_profiles(masks, N, t)
    if method == "rowspace":
        if N > rowspace_cap:
            raise EnumerationCapError(f"N={N} exceeds row-space cap {rowspace_cap}")
        return _rowspace_profiles(masks, N, t)
    raise GroupTestingError(f"unknown profile method {method!r}")


def or_weight_profile(
    code: BinaryCode,
    method: str = "auto",
    lattice_cap: int = LATTICE_CAP,
    rowspace_cap: int = ROWSPACE_CAP,
) -> OrWeightProfile:
    """Exact OR-weight profile of ``code`` over all ``2**t`` subsets.

    ``method`` is ``"lattice"`` (walk the subset lattice), ``"rowspace"``
    (transform over the ``2**N`` row sets) or ``"auto"`` (cheaper of the two).
    Raises EnumerationCapError when neither fits under its cap.
    """
    N, t = code.length, code.size
    if N > 63:
        if t > lattice_cap:
            raise EnumerationCapError(
                f"t={t} exceeds cap {lattice_cap}; use monte_carlo_errors instead"
            )
        return OrWeightProfile(_python_profile(code.masks, N))
    masks = np.array([code.masks], dtype=np.int64)
    counts = batch_profiles(masks, N, method, lattice_cap, rowspace_cap)[0]
    return OrWeightProfile(counts)


# -- error pairs --------------------------------------------------------------


@dataclass(frozen=True)
class ErrorPair:
    """Conditional error probabilities of a decision rule.

    ``alpha`` is Pr{accept H1 | H0}, ``beta`` is Pr{accept H0 | H1}.  The
    standard errors are set only for Monte-Carlo estimates.
    """

    alpha: float
    beta: float
    alpha_se: float | None = None
    beta_se: float | None = None

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise GroupTestingError(f"{name}={v!r} outside [0, 1]")

    @property
    def max_error(self) -> float:
        return max(self.alpha, self.beta)


def max_error(e: ErrorPair) -> float:
    return max(e.alpha, e.beta)


def _threshold_rates(counts: np.ndarray, s: int, prior: Prior) -> tuple[np.ndarray, np.ndarray]:
    """``alpha[b, T-1]`` and ``beta[b, T-1]`` for every T in 1..N-1.

    Pure elementwise arithmetic, so a batch row is bit-identical to the same
    code evaluated alone.
    """
    B, t1, n1 = counts.shape
    t, N = t1 - 1, n1 - 1
    if prior.t != t:
        raise GroupTestingError(f"prior has t={prior.t}, code has t={t}")
    c0, c1 = prior.conditional(s)
    at_most = np.cumsum(counts, axis=2)[:, :, 1:N]   # weight <= T for T = 1..N-1
    alpha = np.zeros((B, N - 1))
    beta = np.zeros((B, N - 1))
    for k in range(t + 1):
        total = math.comb(t, k)
        if k <= s:
            above = (total - at_most[:, k, :]).astype(float)
            alpha += c0[k] * (above / float(total))
        else:
            below = at_most[:, k, :].astype(float)
            beta += c1[k - s - 1] * (below / float(total))
    np.clip(alpha, 0.0, 1.0, out=alpha)
    np.clip(beta, 0.0, 1.0, out=beta)
    return alpha, beta


def _check_rule_params(N: int, t: int, s: int, T: int | None = None) -> None:
    if not 1 <= s <= t - 1:
        raise GroupTestingError(f"s must satisfy 1 <= s <= t-1 = {t - 1}, got {s}")
    if T is not None and not 1 <= T <= N - 1:
        raise GroupTestingError(f"T must satisfy 1 <= T <= N-1 = {N - 1}, got {T}")


def threshold_error_curve(
    profile: OrWeightProfile, s: int, prior: Prior
) -> tuple[np.ndarray, np.ndarray]:
    """Error pairs of the threshold rule for every ``T = 1..N-1`` (index ``T - 1``)."""
    _check_rule_params(profile.N, profile.t, s)
    if profile.N < 2:
        raise GroupTestingError("the threshold rule needs N >= 2")
    alpha, beta = _threshold_rates(profile.counts[None, :, :], s, prior)
    return alpha[0], beta[0]


def threshold_errors(
    code: BinaryCode, s: int, T: int, prior: Prior, profile: OrWeightProfile | None = None
) -> ErrorPair:
    """Exact error pair of the rule "accept H0 iff ``|x(S)| <= T``"."""
    _check_rule_params(code.length, code.size, s, T)
    if profile is None:
        profile = or_weight_profile(code)
    alpha, beta = threshold_error_curve(profile, s, prior)
    return ErrorPair(float(alpha[T - 1]), float(beta[T - 1]))


def _subset_index_arrays(t: int, s: int) -> list[np.ndarray]:
    return [
        np.array(list(combinations(range(t), k)), dtype=np.int64).reshape(math.comb(t, k), k)
        for k in range(s + 1)
    ]


def batch_disjunctive_counts(masks: np.ndarray, s: int, cap: int = DISJUNCTIVE_CAP) -> np.ndarray:
    """``out[b, k]`` = number of k-subsets (k <= s) whose OR covers >= s+1 codewords."""
    masks = np.asarray(masks, dtype=np.int64)
    B, t = masks.shape
    n_subsets = sum(math.comb(t, k) for k in range(s + 1))
    if n_subsets > cap:
        raise EnumerationCapError(
            f"{n_subsets} subsets of size <= {s} exceed cap {cap}; use monte_carlo_errors"
        )
    out = np.zeros((B, s + 1), dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, B * t))
    for k, idx in enumerate(_subset_index_arrays(t, s)):
        for start in range(0, idx.shape[0], chunk):
            sub = idx[start : start + chunk]
            v = np.zeros((B, sub.shape[0]), dtype=np.int64)
            for c in range(k):
                v |= masks[:, sub[:, c]]
            covered = ((masks[:, None, :] & ~v[:, :, None]) == 0).sum(axis=2)
            out[:, k] += (covered >= s + 1).sum(axis=1)
    return out


def _disjunctive_rates(counts: np.ndarray, t: int, s: int, prior: Prior) -> np.ndarray:
    c0, _ = prior.conditional(s)
    alpha = np.zeros(counts.shape[0])
    for k in range(s + 1):
        alpha += c0[k] * (counts[:, k].astype(float) / float(math.comb(t, k)))
    return np.clip(alpha, 0.0, 1.0)


def _python_disjunctive_counts(code: BinaryCode, s: int) -> list[int]:
    out = []
    for k in range(s + 1):
        n = 0
        for _, v in _k_subsets_or(code.masks, k):
            outside = ~v
            if sum(1 for m in code.masks if not m & outside) >= s + 1:
                n += 1
        out.append(n)
    return out


def _assert_disjunctive_beta_zero(code: BinaryCode, s: int) -> None:
    """Verify by enumeration that no subset of size > s is accepted as H0."""
    masks = code.masks
    t = len(masks)
    if t > LATTICE_CAP:
        raise EnumerationCapError(f"beta check needs t <= {LATTICE_CAP}, got t={t}")

    def rec(j: int, acc: int, size: int):
        if j == t:
            if size > s:
                outside = ~acc
                cnt = sum(1 for m in masks if not m & outside)
                assert cnt >= s + 1, f"subset of size {size} covers only {cnt} codewords"
            return
        rec(j + 1, acc, size)
        rec(j + 1, acc | masks[j], size + 1)

    rec(0, 0, 0)


def disjunctive_errors(
    code: BinaryCode, s: int, prior: Prior, check_beta: bool = False
) -> ErrorPair:
    """Exact error pair of the rule "accept H0 iff ``x(S)`` covers at most s codewords".

    Every member of S is covered by x(S), so a set of size > s is never
    accepted as H0 and ``beta`` is 0.  With ``check_beta=True`` this is
    verified by enumerating all subsets.
    """
    _check_rule_params(code.length, code.size, s)
    if code.length > 63:
        counts = np.array([_python_disjunctive_counts(code, s)], dtype=np.int64)
    else:
        counts = batch_disjunctive_counts(np.array([code.masks], dtype=np.int64), s)
    alpha = _disjunctive_rates(counts, code.size, s, prior)
    if check_beta:
        _assert_disjunctive_beta_zero(code, s)
    return ErrorPair(float(alpha[0]), 0.0)


# -- Monte Carlo ----------------------------------------------------------------


def _sample_responses(
    masks: np.ndarray, sizes: np.ndarray, probs: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw |S| from ``probs`` over ``sizes``, then a uniform subset of that size."""
    t = masks.shape[0]
    k = rng.choice(sizes, size=n, p=probs)
    keys = rng.random((n, t))
    ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
    member = ranks < k[:, None]
    return np.bitwise_or.reduce(np.where(member, masks[None, :], 0), axis=1)


def _mc_chunks(samples: int, chunk: int = 1 << 16):
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        yield n
        done += n


def monte_carlo_errors(
    code: BinaryCode,
    s: int,
    prior: Prior,
    samples: int,
    seed: int,
    rule: str = "threshold",
    T: int | None = None,
) -> ErrorPair:
    """Sampled error pair with binomial standard errors.

    ``samples`` defective sets are drawn under each hypothesis.  The result
    is a deterministic function of the arguments.
    """
    if samples < 1:
        raise GroupTestingError("samples must be >= 1")
    if rule == "threshold":
        if T is None:
            raise GroupTestingError("the threshold rule needs T")
        _check_rule_params(code.length, code.size, s, T)
    elif rule == "disjunctive":
        _check_rule_params(code.length, code.size, s)
    else:
        raise GroupTestingError(f"unknown rule {rule!r}")
    if code.length > 63:
        raise GroupTestingError("Monte-Carlo evaluation supports N <= 63")
    c0, c1 = prior.conditional(s)
    t = code.size
    masks = np.array(code.masks, dtype=np.int64)
    rng = np.random.default_rng(seed)
    sides = ((np.arange(0, s + 1), c0, True), (np.arange(s + 1, t + 1), c1, False))
    rates = []
    for sizes, probs, null_side in sides:
        errors = 0
        for n in _mc_chunks(samples):
            v = _sample_responses(masks, sizes, probs, n, rng)
            if rule == "threshold":
                says_h1 = np.bitwise_count(v) > T
            else:
                covered = ((masks[None, :] & ~v[:, None]) == 0).sum(axis=1)
                says_h1 = covered >= s + 1
            errors += int(np.count_nonzero(says_h1 if null_side else ~says_h1))
        rates.append(errors / samples)
    a, b = rates
    return ErrorPair(
        a, b, math.sqrt(a * (1 - a) / samples), math.sqrt(b * (1 - b) / samples)
    )


def monte_carlo_threshold_curve(
    code: BinaryCode, s: int, prior: Prior, samples: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled threshold-rule error rates for every ``T = 1..N-1``, one sample set shared."""
    c0, c1 = prior.conditional(s)
    N, t = code.length, code.size
    masks = np.array(code.masks, dtype=np.int64)
    hist = []
    for sizes, probs in ((np.arange(0, s + 1), c0), (np.arange(s + 1, t + 1), c1)):
        h = np.zeros(N + 1, dtype=np.int64)
        for n in _mc_chunks(samples):
            v = _sample_responses(masks, sizes, probs, n, rng)
            h += np.bincount(np.bitwise_count(v).astype(np.int64), minlength=N + 1)
        hist.append(np.cumsum(h))
    at_most0, at_most1 = hist
    T = np.arange(1, N)
    return (samples - at_most0[T]) / samples, at_most1[T] / samples
