"""Hot numeric kernels with numba and pure-numpy implementations.

Everything here is elementwise, butterfly, or scatter/gather work; reductions
that must be order-independent live in the callers. Both backends perform the
same per-element operations, so results agree to floating-point roundoff (the
Walsh-Hadamard butterflies are bit-identical; transcendental sweeps may differ
in the last ulp because numpy and LLVM libm rounding differ).

Use :data:`scampi.backend.ACTIVE_BACKEND` / ``SCAMPI_DISABLE_NUMBA`` to pick
the backend; ``IMPLS`` exposes both for the backend benchmark.
"""

import numpy as np

from .backend import ACTIVE_BACKEND

# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------


def _np_fwht_inplace(x):
    """In-place Walsh-Hadamard transform (Sylvester/Hadamard ordering).

    ``x.size`` must be a power of two. No normalization is applied:
    the transform matrix has entries +-1.
    """
    n = x.size
    h = 1
    while h < n:
        y = x.reshape(n // (2 * h), 2, h)
        a = y[:, 0, :].copy()
        b = y[:, 1, :]
        y[:, 0, :] = a + b
        y[:, 1, :] = a - b
        h *= 2
    return x


def _np_hadamard_project(x, col_perm, row_sel, pad):
    """Rows ``row_sel`` of (H @ scatter(x)) for the order-``pad`` Hadamard."""
    buf = np.zeros(pad, dtype=np.float64)
    buf[col_perm] = x
    _np_fwht_inplace(buf)
    return buf[row_sel].copy()


def _np_hadamard_backproject(y, row_sel, col_perm, pad):
    """Adjoint of :func:`_np_hadamard_project` (H is symmetric)."""
    buf = np.zeros(pad, dtype=np.float64)
    buf[row_sel] = y
    _np_fwht_inplace(buf)
    return buf[col_perm].copy()


def _np_edge_apply(h, ei, ej):
    return h[ei] - h[ej]


def _np_edge_apply_t(y, ei, ej, n):
    return (np.bincount(ei, weights=y, minlength=n)
            - np.bincount(ej, weights=y, minlength=n))


def _np_edge_abs_apply(h, ei, ej):
    return h[ei] + h[ej]


def _np_edge_abs_apply_t(y, ei, ej, n):
    return (np.bincount(ei, weights=y, minlength=n)
            + np.bincount(ej, weights=y, minlength=n))


def _np_coo_apply(rows, cols, vals, x, m):
    if rows.size == 0:
        return np.zeros(m, dtype=np.float64)
    return np.bincount(rows, weights=vals * x[cols], minlength=m)


def _np_coo_apply_t(rows, cols, vals, y, n):
    if rows.size == 0:
        return np.zeros(n, dtype=np.float64)
    return np.bincount(cols, weights=vals * y[rows], minlength=n)


def _np_sigmoid(x):
    """Overflow-safe logistic 1/(1+exp(-x)), elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _np_snipe_sweep(Sigma, R, omega):
    """Spike-gated posterior mean/variance for the difference entries.

    The gate log-odds is z = R^2/(2 Sigma) - omega; the mean shrinks R by
    sigmoid(z) and the variance interpolates accordingly.
    """
    z = R * R / (2.0 * Sigma) - omega
    s = _np_sigmoid(z)
    fa = R * s
    fv = s * (Sigma + R * R * _np_sigmoid(-z))
    return fa, fv


def _np_bg_posterior_sweep(Sigma, R, lam, a, v):
    """Per-index (pi, gamma, nu) of the Bernoulli-Gaussian posterior.

    pi is the posterior support probability, (gamma, nu) the mean/variance
    of the Gaussian slab component. Evaluated in the log domain so extreme
    exponents never overflow.
    """
    Sigma = np.asarray(Sigma, dtype=np.float64)
    R = np.asarray(R, dtype=np.float64)
    gamma = (a / v + R / Sigma) / (1.0 / v + 1.0 / Sigma)
    nu = 1.0 / (1.0 / v + 1.0 / Sigma)
    if lam <= 0.0:
        pi = np.zeros_like(R)
    elif lam >= 1.0:
        pi = np.ones_like(R)
    else:
        log_eta = (np.log(1.0 - lam) - np.log(lam)
                   + 0.5 * (np.log(v + Sigma) - np.log(Sigma))
                   + (a - R) ** 2 / (2.0 * (v + Sigma))
                   - R * R / (2.0 * Sigma))
        pi = _np_sigmoid(-log_eta)
    return pi, gamma, nu


def _np_bg_sweep(Sigma, R, lam, a, v):
    """Bernoulli-Gaussian posterior mean/variance (spike at 0, slab N(a, v))."""
    pi, gamma, nu = _np_bg_posterior_sweep(Sigma, R, lam, a, v)
    fa = pi * gamma
    fv = pi * (nu + (1.0 - pi) * gamma * gamma)
    return fa, fv


_NUMPY_IMPLS = {
    "fwht_inplace": _np_fwht_inplace,
    "hadamard_project": _np_hadamard_project,
    "hadamard_backproject": _np_hadamard_backproject,
    "edge_apply": _np_edge_apply,
    "edge_apply_t": _np_edge_apply_t,
    "edge_abs_apply": _np_edge_abs_apply,
    "edge_abs_apply_t": _np_edge_abs_apply_t,
    "coo_apply": _np_coo_apply,
    "coo_apply_t": _np_coo_apply_t,
    "sigmoid": _np_sigmoid,
    "snipe_sweep": _np_snipe_sweep,
    "bg_sweep": _np_bg_sweep,
    "bg_posterior_sweep": _np_bg_posterior_sweep,
}

# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

_NUMBA_IMPLS = None

if ACTIVE_BACKEND == "numba":
    from numba import njit

    @njit(cache=True)
    def _nb_fwht_inplace(x):
        n = x.size
        h = 1
        while h < n:
            for i in range(0, n, 2 * h):
                for j in range(i, i + h):
                    a = x[j]
                    b = x[j + h]
                    x[j] = a + b
                    x[j + h] = a - b
            h *= 2
        return x

    @njit(cache=True)
    def _nb_hadamard_project(x, col_perm, row_sel, pad):
        buf = np.zeros(pad, dtype=np.float64)
        for k in range(col_perm.size):
            buf[col_perm[k]] = x[k]
        _nb_fwht_inplace(buf)
        out = np.empty(row_sel.size, dtype=np.float64)
        for k in range(row_sel.size):
            out[k] = buf[row_sel[k]]
        return out

    @njit(cache=True)
    def _nb_hadamard_backproject(y, row_sel, col_perm, pad):
        buf = np.zeros(pad, dtype=np.float64)
        for k in range(row_sel.size):
            buf[row_sel[k]] = y[k]
        _nb_fwht_inplace(buf)
        out = np.empty(col_perm.size, dtype=np.float64)
        for k in range(col_perm.size):
            out[k] = buf[col_perm[k]]
        return out

    @njit(cache=True)
    def _nb_edge_apply(h, ei, ej):
        out = np.empty(ei.size, dtype=np.float64)
        for k in range(ei.size):
            out[k] = h[ei[k]] - h[ej[k]]
        return out

    @njit(cache=True)
    def _nb_edge_apply_t(y, ei, ej, n):
        out = np.zeros(n, dtype=np.float64)
        for k in range(ei.size):
            out[ei[k]] += y[k]
        for k in range(ej.size):
            out[ej[k]] -= y[k]
        return out

    @njit(cache=True)
    def _nb_edge_abs_apply(h, ei, ej):
        out = np.empty(ei.size, dtype=np.float64)
        for k in range(ei.size):
            out[k] = h[ei[k]] + h[ej[k]]
        return out

    @njit(cache=True)
    def _nb_edge_abs_apply_t(y, ei, ej, n):
        out = np.zeros(n, dtype=np.float64)
        for k in range(ei.size):
            out[ei[k]] += y[k]
        for k in range(ej.size):
            out[ej[k]] += y[k]
        return out

    @njit(cache=True)
    def _nb_coo_apply(rows, cols, vals, x, m):
        out = np.zeros(m, dtype=np.float64)
        for k in range(rows.size):
            out[rows[k]] += vals[k] * x[cols[k]]
        return out

    @njit(cache=True)
    def _nb_coo_apply_t(rows, cols, vals, y, n):
        out = np.zeros(n, dtype=np.float64)
        for k in range(rows.size):
            out[cols[k]] += vals[k] * y[rows[k]]
        return out

    @njit(cache=True, inline="always")
    def _nb_sigmoid_scalar(x):
        if x >= 0.0:
            return 1.0 / (1.0 + np.exp(-x))
        ex = np.exp(x)
        return ex / (1.0 + ex)

    @njit(cache=True)
    def _nb_sigmoid(x):
        out = np.empty(x.size, dtype=np.float64)
        for k in range(x.size):
            out[k] = _nb_sigmoid_scalar(x[k])
        return out

    @njit(cache=True)
    def _nb_snipe_sweep(Sigma, R, omega):
        fa = np.empty(R.size, dtype=np.float64)
        fv = np.empty(R.size, dtype=np.float64)
        for k in range(R.size):
            z = R[k] * R[k] / (2.0 * Sigma[k]) - omega
            s = _nb_sigmoid_scalar(z)
            fa[k] = R[k] * s
            fv[k] = s * (Sigma[k] + R[k] * R[k] * _nb_sigmoid_scalar(-z))
        return fa, fv

    @njit(cache=True)
    def _nb_bg_posterior_sweep(Sigma, R, lam, a, v):
        pi = np.empty(R.size, dtype=np.float64)
        gamma = np.empty(R.size, dtype=np.float64)
        nu = np.empty(R.size, dtype=np.float64)
        for k in range(R.size):
            gamma[k] = (a / v + R[k] / Sigma[k]) / (1.0 / v + 1.0 / Sigma[k])
            nu[k] = 1.0 / (1.0 / v + 1.0 / Sigma[k])
            if lam <= 0.0:
                pi[k] = 0.0
            elif lam >= 1.0:
                pi[k] = 1.0
            else:
                log_eta = (np.log(1.0 - lam) - np.log(lam)
                           + 0.5 * (np.log(v + Sigma[k]) - np.log(Sigma[k]))
                           + (a - R[k]) ** 2 / (2.0 * (v + Sigma[k]))
                           - R[k] * R[k] / (2.0 * Sigma[k]))
                pi[k] = _nb_sigmoid_scalar(-log_eta)
        return pi, gamma, nu

    @njit(cache=True)
    def _nb_bg_sweep(Sigma, R, lam, a, v):
        pi, gamma, nu = _nb_bg_posterior_sweep(Sigma, R, lam, a, v)
        fa = np.empty(R.size, dtype=np.float64)
        fv = np.empty(R.size, dtype=np.float64)
        for k in range(R.size):
            fa[k] = pi[k] * gamma[k]
            fv[k] = pi[k] * (nu[k] + (1.0 - pi[k]) * gamma[k] * gamma[k])
        return fa, fv

    _NUMBA_IMPLS = {
        "fwht_inplace": _nb_fwht_inplace,
        "hadamard_project": _nb_hadamard_project,
        "hadamard_backproject": _nb_hadamard_backproject,
        "edge_apply": _nb_edge_apply,
        "edge_apply_t": _nb_edge_apply_t,
        "edge_abs_apply": _nb_edge_abs_apply,
        "edge_abs_apply_t": _nb_edge_abs_apply_t,
        "coo_apply": _nb_coo_apply,
        "coo_apply_t": _nb_coo_apply_t,
        "sigmoid": _nb_sigmoid,
        "snipe_sweep": _nb_snipe_sweep,
        "bg_sweep": _nb_bg_sweep,
        "bg_posterior_sweep": _nb_bg_posterior_sweep,
    }

IMPLS = {"numpy": _NUMPY_IMPLS}
if _NUMBA_IMPLS is not None:
    IMPLS["numba"] = _NUMBA_IMPLS

_ACTIVE = IMPLS.get(ACTIVE_BACKEND, _NUMPY_IMPLS)

fwht_inplace = _ACTIVE["fwht_inplace"]
hadamard_project = _ACTIVE["hadamard_project"]
hadamard_backproject = _ACTIVE["hadamard_backproject"]
edge_apply = _ACTIVE["edge_apply"]
edge_apply_t = _ACTIVE["edge_apply_t"]
edge_abs_apply = _ACTIVE["edge_abs_apply"]
edge_abs_apply_t = _ACTIVE["edge_abs_apply_t"]
coo_apply = _ACTIVE["coo_apply"]
coo_apply_t = _ACTIVE["coo_apply_t"]
sigmoid = _ACTIVE["sigmoid"]
snipe_sweep = _ACTIVE["snipe_sweep"]
bg_sweep = _ACTIVE["bg_sweep"]
bg_posterior_sweep = _ACTIVE["bg_posterior_sweep"]
