"""Inner loops with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``AFTSDAR_DISABLE_NUMBA`` is
unset (or ``0``). Both paths are importable by name so tests and the
benchmark can compare them: ``KERNELS["numba"]`` / ``KERNELS["numpy"]``.
"""
import itertools
import os

import numpy as np

_FLAG = os.environ.get("AFTSDAR_DISABLE_NUMBA", "0").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

BACKEND = "numba" if (HAVE_NUMBA and not _DISABLED) else "numpy"


# --------------------------------------------------------------------------
# pure numpy
# --------------------------------------------------------------------------

def km_jumps_numpy(delta):
    delta = np.asarray(delta, dtype=np.int64)
    n = delta.shape[0]
    at_risk = np.arange(n, 0, -1, dtype=np.float64)
    factors = np.where(delta == 1, (at_risk - 1.0) / at_risk, 1.0)
    surv_before = np.empty(n)
    if n:
        surv_before[0] = 1.0
        surv_before[1:] = np.cumprod(factors)[:-1]
    return np.where(delta == 1, surv_before / at_risk, 0.0)


def top_t_numpy(scores, T):
    # T-th largest value, then strict winners plus the lowest-index ties
    thr = np.partition(scores, scores.shape[0] - T)[scores.shape[0] - T]
    above = np.flatnonzero(scores > thr)
    tied = np.flatnonzero(scores == thr)[:T - above.size]
    return np.sort(np.concatenate((above, tied)))


def min_subset_eig_numpy(gram, k, chunk=20000):
    p = gram.shape[0]
    best = np.inf
    best_idx = None
    combos = itertools.combinations(range(p), k)
    while True:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, chunk)),
                           dtype=np.int64)
        if flat.size == 0:
            break
        c = flat.reshape(-1, k)
        subs = gram[c[:, :, None], c[:, None, :]]
        lo = np.linalg.eigvalsh(subs)[:, 0]
        j = int(np.argmin(lo))
        if lo[j] < best:
            best = float(lo[j])
            best_idx = c[j].copy()
    return best, best_idx


def censored_fraction_numpy(log_t, log_u, log_eta):
    return np.count_nonzero(log_t > log_eta + log_u) / log_t.shape[0]


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------

if HAVE_NUMBA:
    _jit = numba.njit(cache=True)

    @_jit
    def km_jumps_numba(delta):
        n = delta.shape[0]
        w = np.zeros(n)
        surv = 1.0
        for i in range(n):
            r = float(n - i)
            if delta[i] == 1:
                w[i] = surv / r
                surv *= (r - 1.0) / r
        return w

    @_jit
    def min_subset_eig_numba(gram, k):
        p = gram.shape[0]
        idx = np.arange(k)
        best = np.inf
        best_idx = idx.copy()
        sub = np.empty((k, k))
        while True:
            for a in range(k):
                for b in range(k):
                    sub[a, b] = gram[idx[a], idx[b]]
            lo = np.linalg.eigvalsh(sub)[0]
            if lo < best:
                best = lo
                best_idx[:] = idx
            i = k - 1
            while i >= 0 and idx[i] == p - k + i:
                i -= 1
            if i < 0:
                break
            idx[i] += 1
            for j in range(i + 1, k):
                idx[j] = idx[j - 1] + 1
        return best, best_idx

    @_jit
    def censored_fraction_numba(log_t, log_u, log_eta):
        m = log_t.shape[0]
        hits = 0
        for i in range(m):
            if log_t[i] > log_eta + log_u[i]:
                hits += 1
        return hits / m


KERNELS = {
    "numpy": {
        "km_jumps": km_jumps_numpy,
        "top_t": top_t_numpy,
        "min_subset_eig": min_subset_eig_numpy,
        "censored_fraction": censored_fraction_numpy,
    },
}
if HAVE_NUMBA:
    KERNELS["numba"] = {
        "km_jumps": km_jumps_numba,
        # numpy's introselect beats a jitted np.partition here
        "top_t": top_t_numpy,
        "min_subset_eig": min_subset_eig_numba,
        "censored_fraction": censored_fraction_numba,
    }


def km_jumps(delta):
    """Kaplan-Meier jump at each sorted position (0 where censored)."""
    return KERNELS[BACKEND]["km_jumps"](np.ascontiguousarray(delta, dtype=np.int64))


def top_t(scores, T):
    """Ascending indices of the ``T`` largest scores, lowest index wins ties."""
    return KERNELS[BACKEND]["top_t"](np.ascontiguousarray(scores, dtype=np.float64), int(T))


def min_subset_eig(gram, k):
    """Smallest eigenvalue over all ``k``-index principal submatrices of ``gram``.

    Returns ``(value, indices)`` for the first minimizing subset in
    lexicographic order.
    """
    gram = np.ascontiguousarray(gram, dtype=np.float64)
    value, idx = KERNELS[BACKEND]["min_subset_eig"](gram, int(k))
    return float(value), np.asarray(idx, dtype=np.int64)


def censored_fraction(log_t, log_u, log_eta):
    return float(KERNELS[BACKEND]["censored_fraction"](log_t, log_u, float(log_eta)))
