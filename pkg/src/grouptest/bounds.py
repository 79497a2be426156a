"""Random-coding lower bounds on the error exponents of both decision rules.

All exponents are base-2.  Notation: ``Q`` is the relative weight of the
constant-weight ensemble, ``q`` the relative weight of a response vector,
``tau`` the relative threshold ``T / N``, and ``y`` the root in (0, 1) of
``q = Q (1 - y**s) / (1 - y)``.

The inner function is evaluated in the form

    A = (1-q) log(1-q) + q log Q + s Q S_{s-1}(y) * y log y
        + Q D(y) * (1-y) log(1-y) + s h(Q),

with ``S_m(y) = 1 + y + ... + y**(m-1)`` and ``D(y) = sum_{i<s} S_i(y)``.
It is algebraically the usual expression but finite at both ends of the
``q``-range (y -> 0 at q = Q, y -> 1 at q = sQ), so no special-casing of
``inf - inf`` is needed there.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Callable

import numpy as np

from .exceptions import GroupTestingError

__all__ = [
    "ExponentResult",
    "binary_entropy",
    "solve_root_y",
    "exponent_A",
    "exponent_A_threshold",
    "bound_disjunctive",
    "bound_threshold",
    "optimal_threshold_exponent",
    "critical_rate",
    "Table1Row",
    "table1",
    "table1_csv",
    "DEFAULT_GRID",
    "DEFAULT_TOL",
]

DEFAULT_GRID = 2000
DEFAULT_TOL = 1e-6
DEFAULT_TAU_STEP = 1e-3
#: distance from an end of the q-range at which the analytic limit is used
BOUNDARY_SNAP = 1e-9
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ExponentResult:
    """A bound value together with its optimizing parameters."""

    value: float
    Q: float
    q: float | None = None
    tau: float | None = None
    y: float | None = None
    tolerance: float = DEFAULT_TOL


# -- scalar building blocks ---------------------------------------------------


def _xlog2(x):
    """``x log2 x`` with the value 0 at x = 0 (array or scalar)."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log2(safe), 0.0)


def _h(Q):
    Q = np.asarray(Q, dtype=float)
    return -_xlog2(Q) - _xlog2(1.0 - Q)


def binary_entropy(Q: float) -> float:
    """``-Q log2 Q - (1-Q) log2 (1-Q)``, with h(0) = h(1) = 0."""
    if not 0.0 <= Q <= 1.0:
        raise GroupTestingError(f"binary entropy needs 0 <= Q <= 1, got {Q}")
    if Q == 0.0 or Q == 1.0:
        return 0.0
    return -Q * math.log2(Q) - (1.0 - Q) * math.log2(1.0 - Q)


def _geom(y, m: int):
    """``1 + y + ... + y**(m-1)`` by Horner's rule (0 for m = 0)."""
    acc = np.zeros_like(y) if isinstance(y, np.ndarray) else 0.0
    for _ in range(m):
        acc = acc * y + 1.0
    return acc


def _dsum(y, s: int):
    """``sum_{i=1}^{s-1} S_i(y) = sum_{j=0}^{s-2} (s-1-j) y**j``."""
    acc = np.zeros_like(y) if isinstance(y, np.ndarray) else 0.0
    for j in range(s - 2, -1, -1):
        acc = acc * y + (s - 1 - j)
    return acc


def _A_of_y(s: int, Q, y):
    """The exponent in terms of the root ``y`` (vectorized, y in [0, 1])."""
    q = Q * _geom(y, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        logQ = np.log2(Q)
    return (
        _xlog2(1.0 - q)
        + q * logQ
        + s * Q * _geom(y, s - 1) * _xlog2(y)
        + Q * _dsum(y, s) * _xlog2(1.0 - y)
        + s * _h(Q)
    )


def _check_Q(Q: float) -> None:
    if not 0.0 < Q < 1.0:
        raise GroupTestingError(f"Q must lie in (0, 1), got {Q}")


def solve_root_y(s: int, Q: float, q: float) -> float:
    """Root ``y`` in (0, 1) of ``q = Q (1 - y**s) / (1 - y)``, by bisection.

    The left side is ``Q (1 + y + ... + y**(s-1))``, increasing from ``Q`` to
    ``sQ`` on [0, 1], so an interior root exists iff ``Q < q < sQ``.
    """
    if s < 2:
        raise GroupTestingError(f"root equation needs s >= 2, got {s}")
    _check_Q(Q)
    if not Q < q < s * Q:
        raise GroupTestingError(f"no interior root: need Q < q < sQ, got Q={Q}, q={q}, s={s}")
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if Q * _geom(mid, s) < q:
            lo = mid
        else:
            hi = mid
    r_lo = abs(Q * _geom(lo, s) - q)
    r_hi = abs(Q * _geom(hi, s) - q)
    return lo if r_lo <= r_hi else hi


def _root_y_vec(s: int, Q: np.ndarray, q: np.ndarray, iters: int = 64) -> np.ndarray:
    """Vectorized bisection; entries outside (Q, sQ) are clipped to 0 or 1."""
    lo = np.zeros(np.broadcast(Q, q).shape)
    hi = np.ones_like(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = Q * _geom(mid, s) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _y_for(s: int, Q: float, q: float) -> float:
    """Root with the analytic end-point limits snapped in."""
    if q - Q <= BOUNDARY_SNAP or s == 1:
        return 0.0
    if s * Q <= 1.0 and s * Q - q <= BOUNDARY_SNAP:
        return 1.0
    return solve_root_y(s, Q, q)


def exponent_A(s: int, Q: float, q: float) -> float:
    """The random-coding exponent A(s, Q, q) for ``Q <= q <= min(1, sQ)``."""
    if s < 1:
        raise GroupTestingError(f"s must be >= 1, got {s}")
    _check_Q(Q)
    upper = min(1.0, s * Q)
    if not Q - 1e-12 <= q <= upper + 1e-12:
        raise GroupTestingError(f"q={q} outside [Q, min(1, sQ)] = [{Q}, {upper}]")
    y = _y_for(s, Q, q)
    return float(_A_of_y(s, Q, y))


def exponent_A_threshold(s: int, Q: float, q: float) -> float:
    """A(s, Q, q) when ``Q <= q <= sQ``, otherwise ``+inf``."""
    _check_Q(Q)
    if not 0.0 < q < 1.0:
        raise GroupTestingError(f"q must lie in (0, 1), got {q}")
    if Q <= q <= s * Q:
        return exponent_A(s, Q, q)
    return math.inf


# -- 1-D refinement -----------------------------------------------------------


def _golden(f: Callable[[float], float], a: float, b: float, tol: float, maximize: bool):
    """Golden-section search on [a, b]; returns the best ``(x, f(x))`` seen."""
    sign = -1.0 if maximize else 1.0
    g = lambda x: sign * f(x)
    best = min(((a, g(a)), (b, g(b))), key=lambda p: p[1])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = g(c), g(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = g(d)
    for p in ((c, fc), (d, fd)):
        if p[1] < best[1]:
            best = p
    return best[0], sign * best[1]


def _bracket(grid: np.ndarray, i: int) -> tuple[float, float]:
    return float(grid[max(i - 1, 0)]), float(grid[min(i + 1, grid.size - 1)])


# -- disjunctive-rule bound ---------------------------------------------------


def _penalty(Q, q):
    """``h(Q) - q h(Q/q)``."""
    return _h(Q) - q * _h(Q / q)


def _y_max(s: int, Q: np.ndarray) -> np.ndarray:
    """Largest admissible root: 1 when sQ <= 1, else the root of Q S_s(y) = 1."""
    ymax = np.ones_like(Q)
    over = s * Q > 1.0
    if over.any():
        ymax[over] = _root_y_vec(s, Q[over], np.ones(over.sum()))
    return ymax


@lru_cache(maxsize=32)
def _disjunctive_surface(s: int, grid: int):
    """Cached grid of A(s, Q, q(y)) and the rate penalty on (Q, u), y = u * y_max(Q)."""
    Q = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    u = np.linspace(0.0, 1.0, grid + 1)
    y = _y_max(s, Q)[:, None] * u[None, :]
    A = _A_of_y(s, Q[:, None], y)
    q = Q[:, None] * _geom(y, s)
    P = _penalty(Q[:, None], q)
    for arr in (Q, u, A, P):
        arr.setflags(write=False)
    return Q, u, A, P


def _disjunctive_objective(s: int, Q: float, y, R: float):
    q = Q * _geom(y, s)
    return _A_of_y(s, Q, y) + np.maximum(_penalty(Q, q) - R, 0.0)


def _inner_min(s: int, Q: float, R: float, grid: int, tol: float) -> tuple[float, float]:
    """min over the admissible q-range at fixed Q; returns ``(y, value)``."""
    ymax = float(_y_max(s, np.array([Q]))[0])
    ys = np.linspace(0.0, ymax, grid + 1)
    vals = _disjunctive_objective(s, Q, ys, R)
    j = int(np.argmin(vals))
    a, b = _bracket(ys, j)
    y, v = _golden(lambda yy: float(_disjunctive_objective(s, Q, yy, R)), a, b, tol, False)
    if vals[j] < v:
        y, v = float(ys[j]), float(vals[j])
    return y, v


def bound_disjunctive(
    s: int, R: float, grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL
) -> ExponentResult:
    """Lower bound on the disjunctive-rule exponent at rate ``R``.

    max over Q of min over q in [Q, min(1, sQ)] of
    ``A(s, Q, q) + [h(Q) - q h(Q/q) - R]^+``, clamped at 0.  A uniform grid
    on both axes locates the optimum; golden-section passes refine it.
    """
    if s < 1:
        raise GroupTestingError(f"s must be >= 1, got {s}")
    if R < 0:
        raise GroupTestingError(f"rate must be >= 0, got {R}")
    Qs, _, A, P = _disjunctive_surface(s, grid)
    g = (A + np.maximum(P - R, 0.0)).min(axis=1)
    i = int(np.argmax(g))
    a, b = _bracket(Qs, i)
    inner = lambda Q: _inner_min(s, Q, R, grid, tol)[1]
    Q_star, _ = _golden(inner, a, b, tol, True)
    y_star, value = _inner_min(s, Q_star, R, grid, tol)
    q_star = Q_star * _geom(y_star, s)
    return ExponentResult(max(value, 0.0), Q_star, q=q_star, y=y_star, tolerance=tol)


# -- threshold-rule bound -----------------------------------------------------


def _q_interval(s: int, tau: float) -> tuple[float, float]:
    lo = 1.0 - (1.0 - tau) ** (1.0 / (s + 1))
    hi = 1.0 - (1.0 - tau) ** (1.0 / s)
    return lo, hi


def _threshold_objective_vec(s: int, Q: np.ndarray, tau) -> np.ndarray:
    """``min{A'(s, Q, tau), A(s+1, Q, tau)}`` on arrays (broadcasting Q and tau)."""
    Q, tau = np.broadcast_arrays(np.asarray(Q, float), np.asarray(tau, float))
    inside = (Q <= tau) & (tau <= s * Q)
    if s == 1:
        a_s = np.where(np.isclose(tau, Q, rtol=0, atol=BOUNDARY_SNAP), 0.0, np.inf)
    else:
        y_s = _root_y_vec(s, Q, tau)
        a_s = np.where(inside, _A_of_y(s, Q, y_s), np.inf)
    y_s1 = _root_y_vec(s + 1, Q, tau)
    a_s1 = _A_of_y(s + 1, Q, y_s1)
    return np.minimum(a_s, a_s1)


def _threshold_objective(s: int, Q: float, tau: float) -> float:
    a_s = exponent_A_threshold(s, Q, tau)
    a_s1 = exponent_A(s + 1, Q, min(max(tau, Q), min(1.0, (s + 1) * Q)))
    return min(a_s, a_s1)


def bound_threshold(
    s: int, tau: float, grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL
) -> ExponentResult:
    """Lower bound on the threshold-rule exponent at relative threshold ``tau``.

    The bound is the same for every rate, so no rate argument is taken.
    """
    if s < 1:
        raise GroupTestingError(f"s must be >= 1, got {s}")
    if not 0.0 < tau < 1.0:
        raise GroupTestingError(f"tau must lie in (0, 1), got {tau}")
    lo, hi = _q_interval(s, tau)
    assert lo < hi, "empty Q-interval"
    Qs = np.linspace(lo, hi, grid + 2)[1:-1]
    vals = _threshold_objective_vec(s, Qs, tau)
    i = int(np.argmax(vals))
    a, b = _bracket(Qs, i)
    Q_star, value = _golden(lambda Q: _threshold_objective(s, Q, tau), a, b, tol, True)
    if vals[i] > value:
        Q_star, value = float(Qs[i]), float(vals[i])
    y_star = float(_root_y_vec(s + 1, np.array(Q_star), np.array(tau)))
    return ExponentResult(max(value, 0.0), Q_star, tau=tau, y=y_star, tolerance=tol)


@lru_cache(maxsize=64)
def optimal_threshold_exponent(
    s: int, grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL, tau_step: float = DEFAULT_TAU_STEP
) -> ExponentResult:
    """Maximize the threshold bound over ``tau`` (grid, then golden section)."""
    if s < 1:
        raise GroupTestingError(f"s must be >= 1, got {s}")
    taus = np.arange(tau_step, 1.0 - tau_step / 2, tau_step)
    u = np.linspace(0.0, 1.0, grid + 2)[1:-1]
    best = np.empty(taus.size)
    chunk = max(1, (1 << 20) // grid)
    for start in range(0, taus.size, chunk):
        tt = taus[start : start + chunk, None]
        lo, hi = _q_interval(s, tt)
        Q = lo + (hi - lo) * u[None, :]
        best[start : start + chunk] = _threshold_objective_vec(s, Q, tt).max(axis=1)
    i = int(np.argmax(best))
    a, b = _bracket(taus, i)
    tau_star, _ = _golden(lambda tau: bound_threshold(s, tau, grid, tol).value, a, b, tol, True)
    return bound_threshold(s, tau_star, grid, tol)


def critical_rate(
    s: int, grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL, rate_tol: float = 1e-5
) -> float:
    """Largest rate at which the disjunctive bound still exceeds the optimal threshold bound.

    Found by bisection, using that the disjunctive bound does not increase
    with the rate.  Returns 0 if the disjunctive bound never exceeds it.
    """
    target = optimal_threshold_exponent(s, grid, tol).value
    if bound_disjunctive(s, 0.0, grid, tol).value <= target:
        return 0.0
    lo, hi = 0.0, 1.0 / s
    while bound_disjunctive(s, hi, grid, tol).value > target:
        lo, hi = hi, 2 * hi
    while hi - lo > rate_tol:
        mid = 0.5 * (lo + hi)
        if bound_disjunctive(s, mid, grid, tol).value > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- bounds table -------------------------------------------------------------


@dataclass(frozen=True)
class Table1Row:
    s: int
    E_thr: float
    tau: float
    Q: float
    E_s0: float
    R_cr: float


def table1(s_values, grid: int = DEFAULT_GRID, tol: float = DEFAULT_TOL) -> list[Table1Row]:
    rows = []
    for s in s_values:
        thr = optimal_threshold_exponent(s, grid, tol)
        e0 = bound_disjunctive(s, 0.0, grid, tol)
        rows.append(Table1Row(s, thr.value, thr.tau, thr.Q, e0.value, critical_rate(s, grid, tol)))
    return rows


TABLE1_HEADER = [f.name for f in fields(Table1Row)]


def table1_csv(rows: list[Table1Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE1_HEADER)
    for r in rows:
        writer.writerow([r.s] + [repr(float(getattr(r, k))) for k in TABLE1_HEADER[1:]])
    return buf.getvalue()
