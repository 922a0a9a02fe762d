"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numpy implementations are always importable (``*_numpy``). When numba
is available and ``REPGAP_NO_NUMBA`` is not set, the module-level names
``solve_assignment``, ``kl_rows`` and ``js_rows`` are bound to compiled
``@njit`` versions; otherwise they fall back to the numpy path. Set
``REPGAP_NO_NUMBA=1`` before import to force the fallback. The selected
backend is reported in ``BACKEND`` ("numba" or "numpy").

``benchmarks/bench_kernels.py`` compares both paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

_LOG2 = math.log(2.0)


def _disabled_by_env() -> bool:
    return os.environ.get("REPGAP_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}


# ---------------------------------------------------------------------------
# Pure numpy implementations
# ---------------------------------------------------------------------------

def kl_rows_numpy(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL divergence in nats for two (n, d) stacks of distributions.

    Rows where some q_i = 0 while p_i > 0 evaluate to +inf. Values inside
    negative rounding error of zero are clamped to 0.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    support = p > 0.0
    blown = np.any(support & (q <= 0.0), axis=1)
    safe_q = np.where(support & (q > 0.0), q, 1.0)
    safe_p = np.where(support, p, 1.0)
    # log difference rather than log of the ratio: p/q overflows for
    # denormal q although the true term is finite
    terms = np.where(support, safe_p * (np.log(safe_p) - np.log(safe_q)), 0.0)
    out = np.maximum(terms.sum(axis=1), 0.0)
    out[blown] = np.inf
    return out


def js_rows_numpy(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise Jensen-Shannon divergence in bits, always finite in [0, 1].

    Each row is 0.5*KL(p||m) + 0.5*KL(q||m) with m = (p+q)/2 and base-2
    logarithms; the mixture has full support wherever p or q does, so no
    row can blow up. Rounding spill past the [0, 1] range is clamped.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m = 0.5 * (p + q)
    pos_m = m > 0.0
    safe_m = np.where(pos_m, m, 1.0)
    # excluded lanes divide safe_m by itself so no spurious overflow can
    # fire; m underflows to 0 only for denormal-vs-zero entries, where
    # the ratio against the mixture is exactly 2
    ratio_p = np.where((p > 0.0) & pos_m, p, safe_m) / safe_m
    ratio_q = np.where((q > 0.0) & pos_m, q, safe_m) / safe_m
    terms_p = np.where(pos_m, p * np.log(ratio_p), p * _LOG2)
    terms_q = np.where(pos_m, q * np.log(ratio_q), q * _LOG2)
    out = 0.5 * (terms_p.sum(axis=1) + terms_q.sum(axis=1)) / _LOG2
    return np.clip(out, 0.0, 1.0)


def solve_assignment_numpy(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect assignment on a square cost matrix.

    Shortest-augmenting-path algorithm with dual potentials, O(n^3).
    Returns (col_of_row, total_cost): row i is matched to column
    col_of_row[i]. The inner relaxation scan is vectorized over columns.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape != (n, n):
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    if n == 0:
        return np.empty(0, dtype=np.int64), 0.0

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    # row_of_col[j] = row matched to column j (1-based; 0 means free)
    row_of_col = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    cols = np.arange(1, n + 1)

    for i in range(1, n + 1):
        row_of_col[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row_of_col[j0]
            free = ~used[1:]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(cols[np.argmin(masked)])
            delta = masked[j1 - 1]
            u[row_of_col[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if row_of_col[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            row_of_col[j0] = row_of_col[j1]
            j0 = j1

    col_of_row = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        col_of_row[row_of_col[j] - 1] = j - 1
    total = float(cost[np.arange(n), col_of_row].sum())
    return col_of_row, total


# ---------------------------------------------------------------------------
# Numba fast path
# ---------------------------------------------------------------------------

_NUMBA_OK = False
if not _disabled_by_env():
    try:
        from numba import njit

        _NUMBA_OK = True
    except ImportError:  # pragma: no cover - numba is an install-time choice
        _NUMBA_OK = False

if _NUMBA_OK:

    @njit(cache=True)
    def _kl_rows_nb(p, q):  # pragma: no cover - exercised via wrapper
        n, d = p.shape
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            blown = False
            for k in range(d):
                pi = p[i, k]
                if pi > 0.0:
                    qi = q[i, k]
                    if qi <= 0.0:
                        blown = True
                        break
                    # log difference: pi/qi overflows for denormal qi
                    acc += pi * (np.log(pi) - np.log(qi))
            if blown:
                out[i] = np.inf
            else:
                out[i] = acc if acc > 0.0 else 0.0
        return out

    @njit(cache=True)
    def _js_rows_nb(p, q):  # pragma: no cover - exercised via wrapper
        n, d = p.shape
        out = np.empty(n)
        for i in range(n):
            acc = 0.0
            for k in range(d):
                pi = p[i, k]
                qi = q[i, k]
                m = 0.5 * (pi + qi)
                # m underflows to 0 only for denormal-vs-zero entries;
                # the ratio against the mixture is then exactly 2
                if pi > 0.0:
                    acc += pi * np.log(pi / m) if m > 0.0 else pi * _LOG2
                if qi > 0.0:
                    acc += qi * np.log(qi / m) if m > 0.0 else qi * _LOG2
            val = 0.5 * acc / _LOG2
            if val < 0.0:
                val = 0.0
            elif val > 1.0:
                val = 1.0
            out[i] = val
        return out

    @njit(cache=True)
    def _solve_assignment_nb(cost):  # pragma: no cover - exercised via wrapper
        n = cost.shape[0]
        u = np.zeros(n + 1)
        v = np.zeros(n + 1)
        row_of_col = np.zeros(n + 1, dtype=np.int64)
        way = np.zeros(n + 1, dtype=np.int64)
        minv = np.empty(n + 1)
        used = np.empty(n + 1, dtype=np.bool_)

        for i in range(1, n + 1):
            row_of_col[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = np.inf
                used[j] = False
            while True:
                used[j0] = True
                i0 = row_of_col[j0]
                delta = np.inf
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[row_of_col[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if row_of_col[j0] == 0:
                    break
            while j0 != 0:
                j1 = way[j0]
                row_of_col[j0] = row_of_col[j1]
                j0 = j1

        col_of_row = np.empty(n, dtype=np.int64)
        total = 0.0
        for j in range(1, n + 1):
            col_of_row[row_of_col[j] - 1] = j - 1
        for i in range(n):
            total += cost[i, col_of_row[i]]
        return col_of_row, total

    def kl_rows_numba(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return _kl_rows_nb(
            np.ascontiguousarray(p, dtype=np.float64),
            np.ascontiguousarray(q, dtype=np.float64),
        )

    def js_rows_numba(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return _js_rows_nb(
            np.ascontiguousarray(p, dtype=np.float64),
            np.ascontiguousarray(q, dtype=np.float64),
        )

    def solve_assignment_numba(cost: np.ndarray) -> tuple[np.ndarray, float]:
        cost = np.ascontiguousarray(cost, dtype=np.float64)
        n = cost.shape[0]
        if cost.shape != (n, n):
            raise ValueError(f"cost matrix must be square, got {cost.shape}")
        if n == 0:
            return np.empty(0, dtype=np.int64), 0.0
        col_of_row, total = _solve_assignment_nb(cost)
        return col_of_row, float(total)

    BACKEND = "numba"
    kl_rows = kl_rows_numba
    js_rows = js_rows_numba
    solve_assignment = solve_assignment_numba
else:
    kl_rows_numba = None
    js_rows_numba = None
    solve_assignment_numba = None

    BACKEND = "numpy"
    kl_rows = kl_rows_numpy
    js_rows = js_rows_numpy
    solve_assignment = solve_assignment_numpy
