"""NumPy fallback for the reservoir kernels in ``_kernels.pyx``.

Vectorised over nodes, sequential over the summation index, so every
element sees exactly the additions the compiled loop performs.
"""
import numpy as np


def _activate(X, i0, quantise, phase_step, in_levels, table):
    if quantise:
        k = np.floor(X / phase_step + 0.5)
        level = k - in_levels * np.floor(k / in_levels)
        return table[level.astype(np.intp)]
    s = np.sin(X)
    return i0 * (s * s)


def _input_drive(b, inputs):
    T, N = inputs.shape[0], b.shape[0]
    inp = np.zeros((T, N))
    for k in range(b.shape[1]):
        inp += inputs[:, k][:, None] * b[:, k][None, :]
    return inp


def run_dense(W, b, inputs, x0, i0, quantise, phase_step, in_levels, table):
    T, N = inputs.shape[0], W.shape[0]
    cols = np.ascontiguousarray(W.T)
    inp = _input_drive(b, inputs)
    out = np.empty((T, N))
    x = np.array(x0, dtype=np.float64)
    for t in range(T):
        rec = np.zeros(N)
        for j in range(N):
            rec += cols[j] * x[j]
        x = _activate(rec + inp[t], i0, quantise, phase_step, in_levels, table)
        out[t] = x
    return out


def _ell(indptr, indices, data):
    """Pad CSR rows to equal length; padding contributes 0.0 * x[i]."""
    N = indptr.shape[0] - 1
    counts = np.diff(indptr)
    width = int(counts.max()) if N else 0
    cols = np.repeat(np.arange(N)[:, None], width, axis=1)
    vals = np.zeros((N, width))
    rows = np.repeat(np.arange(N), counts)
    slot = np.arange(indices.shape[0]) - np.repeat(indptr[:-1], counts)
    cols[rows, slot] = indices
    vals[rows, slot] = data
    return np.ascontiguousarray(cols.T), np.ascontiguousarray(vals.T)


def run_csr(indptr, indices, data, b, inputs, x0, i0, quantise, phase_step, in_levels, table):
    T, N = inputs.shape[0], indptr.shape[0] - 1
    cols, vals = _ell(indptr, indices, data)
    inp = _input_drive(b, inputs)
    out = np.empty((T, N))
    x = np.array(x0, dtype=np.float64)
    for t in range(T):
        rec = np.zeros(N)
        for c in range(cols.shape[0]):
            rec += vals[c] * x[cols[c]]
        x = _activate(rec + inp[t], i0, quantise, phase_step, in_levels, table)
        out[t] = x
    return out
