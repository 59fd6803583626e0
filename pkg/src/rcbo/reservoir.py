"""Simulated photonic reservoir.

State update::

    x(n+1) = f_nl(W x(n) + b u(n))
    f_nl(X) = Q_out(i0 * sin^2(Q_in(X)))

``Q_in`` models the phase SLM: the phase is rounded to the nearest of
``2**quant_in_bits`` levels spanning one 2*pi period (gray levels wrap).
``Q_out`` models the camera: intensity / i0 is floored onto
``2**quant_out_bits`` levels ``k / 2**bits`` and rescaled by ``i0``.

The time loop runs in a compiled kernel when ``rcbo._kernels`` was built,
otherwise in a NumPy fallback with identical arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from rcbo import _pykernels
from rcbo.hyperspace import HyperPoint
from rcbo.matrix_io import read_matrix, write_matrix

try:
    from rcbo import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on build
    _compiled = None

_BACKENDS = {"python": _pykernels}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

DEFAULT_BACKEND = "cython" if _compiled is not None else "python"

# RNG substreams spawned from SeedSequence(rng_seed)
MASK_STREAM = 0
INTERCONNECTION_STREAM = 1


class ReservoirError(ValueError):
    """Bad shapes or configuration."""


class NumericError(ArithmeticError):
    """Non-finite values reached the reservoir."""


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def get_backend(name: str | None = None):
    name = name or DEFAULT_BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ReservoirError(f"backend {name!r} unavailable; have {available_backends()}") from None


@dataclass(frozen=True)
class ReservoirConfig:
    n_nodes: int
    n_inputs: int
    point: HyperPoint
    i0: float = 1.0
    quant_in_bits: int = 8
    quant_out_bits: int = 10
    quantisation_enabled: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1 or self.n_inputs < 1:
            raise ReservoirError("n_nodes and n_inputs must be >= 1")
        if not self.i0 > 0:
            raise ReservoirError(f"i0 must be > 0, got {self.i0}")
        if self.quant_in_bits < 1 or self.quant_out_bits < 1:
            raise ReservoirError("bit depths must be >= 1")

    def with_point(self, point: HyperPoint) -> "ReservoirConfig":
        return replace(self, point=point)

    def _streams(self):
        return np.random.SeedSequence(self.rng_seed).spawn(2)


@dataclass(frozen=True, eq=False)
class InterconnectionMatrix:
    """Sparse N x N matrix: ``alpha`` on the diagonal, ``gamma`` on a random
    off-diagonal subset.  Stored as CSR with sorted column indices and the
    diagonal always present."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n: int
    _dense: list = field(default_factory=list, repr=False)

    @property
    def nnz_offdiag(self) -> int:
        return int(self.indices.shape[0] - self.n)

    @property
    def offdiag_fraction(self) -> float:
        if self.n < 2:
            return 0.0
        return self.nnz_offdiag / (self.n * (self.n - 1))

    @property
    def prefers_sparse(self) -> bool:
        # sparse when mean off-diagonal nonzeros per row <= N/8
        return self.nnz_offdiag / self.n <= self.n / 8

    def dense(self) -> np.ndarray:
        if not self._dense:
            self._dense.append(np.ascontiguousarray(self.to_scipy().toarray()))
        return self._dense[0]

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n, self.n))

    @classmethod
    def from_dense(cls, W) -> "InterconnectionMatrix":
        W = np.asarray(W, dtype=float)
        n = W.shape[0]
        mask = W != 0
        np.fill_diagonal(mask, True)
        counts = mask.sum(axis=1)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        rows, cols = np.nonzero(mask)
        return cls(indptr, cols.astype(np.int64), W[rows, cols].copy(), n)


def generate_input_mask(cfg: ReservoirConfig) -> np.ndarray:
    """Input mask ``b``: i.i.d. uniform on [-1, 1], scaled by beta."""
    rng = np.random.default_rng(cfg._streams()[MASK_STREAM])
    return rng.uniform(-1.0, 1.0, size=(cfg.n_nodes, cfg.n_inputs)) * cfg.point.beta


def generate_interconnection(cfg: ReservoirConfig) -> InterconnectionMatrix:
    """Diagonal ``alpha``; each off-diagonal entry is ``gamma`` with probability ``rho``.

    Per row the number of off-diagonal links is drawn as Binomial(N-1, rho)
    and their columns uniformly without replacement, which is the same law
    as independent Bernoulli draws but costs O(nnz).
    """
    n = cfg.n_nodes
    alpha, gamma, rho = cfg.point.alpha, cfg.point.gamma, cfg.point.rho
    if not 0.0 <= rho <= 1.0:
        raise ReservoirError(f"rho must be in [0, 1], got {rho}")
    rng = np.random.default_rng(cfg._streams()[INTERCONNECTION_STREAM])
    counts = rng.binomial(n - 1, rho, size=n) if n > 1 else np.zeros(1, dtype=np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(counts + 1)
    indices = np.empty(indptr[-1], dtype=np.int64)
    data = np.empty(indptr[-1])
    for i in range(n):
        k = int(counts[i])
        pos = rng.choice(n - 1, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
        cols = np.sort(np.concatenate([np.where(pos < i, pos, pos + 1), [i]]))
        lo, hi = indptr[i], indptr[i + 1]
        indices[lo:hi] = cols
        data[lo:hi] = np.where(cols == i, alpha, gamma)
    return InterconnectionMatrix(indptr, indices, data, n)


def phase_step(bits: int) -> float:
    return (2.0 * math.pi) / (1 << bits)


def quantise_phase(X, bits: int = 8):
    """Round phases to the nearest multiple of ``2*pi / 2**bits`` (unwrapped,
    nondecreasing).  The SLM gray level is this multiple modulo ``2**bits``."""
    step = phase_step(bits)
    return step * np.floor(np.asarray(X, dtype=float) / step + 0.5)


def quantise_intensity(v, bits: int = 10):
    """Floor normalised intensities in [0, 1] onto ``k / 2**bits``, k < 2**bits."""
    levels = 1 << bits
    return np.minimum(np.floor(np.asarray(v, dtype=float) * levels), levels - 1) / levels


def response_table(cfg: ReservoirConfig) -> np.ndarray:
    """Quantised output for each of the ``2**quant_in_bits`` SLM gray levels."""
    levels = 1 << cfg.quant_in_bits
    s = np.sin(np.arange(levels) * phase_step(cfg.quant_in_bits))
    return np.ascontiguousarray(cfg.i0 * quantise_intensity(s * s, cfg.quant_out_bits))


def _kernel_args(cfg: ReservoirConfig):
    if cfg.quantisation_enabled:
        table = response_table(cfg)
    else:
        table = np.zeros(1)
    return (float(cfg.i0), bool(cfg.quantisation_enabled), phase_step(cfg.quant_in_bits),
            1 << cfg.quant_in_bits, table)


def nonlinearity(x_pre, cfg: ReservoirConfig) -> np.ndarray:
    """Elementwise ``f_nl``; identity quantisers when quantisation is disabled."""
    X = np.asarray(x_pre, dtype=float)
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite pre-activation")
    return _pykernels._activate(X, *_kernel_args(cfg))


def initial_state(cfg: ReservoirConfig) -> np.ndarray:
    return np.zeros(cfg.n_nodes)


def run_sequence(cfg: ReservoirConfig, W: InterconnectionMatrix, b: np.ndarray, inputs,
                 x0=None, *, path: str = "auto", backend: str | None = None) -> np.ndarray:
    """Drive the reservoir with ``inputs`` (T x K) from ``x0``; returns T x N states.

    Row ``t`` is the state after consuming input row ``t``.  ``path`` picks the
    interconnection representation: ``"sparse"``, ``"dense"`` or ``"auto"``.
    """
    n, k = cfg.n_nodes, cfg.n_inputs
    inputs = np.ascontiguousarray(np.atleast_2d(np.asarray(inputs, dtype=float)))
    if inputs.size == 0:
        return np.empty((0, n))
    b = np.ascontiguousarray(b, dtype=float)
    x0 = initial_state(cfg) if x0 is None else np.ascontiguousarray(x0, dtype=float)
    if W.n != n or b.shape != (n, k) or inputs.shape[1] != k or x0.shape != (n,):
        raise ReservoirError(
            f"shape mismatch: W {W.n}x{W.n}, b {b.shape}, inputs {inputs.shape}, x0 {x0.shape}"
            f" for N={n}, K={k}")
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(x0))):
        raise NumericError("non-finite input or initial state")
    kern = get_backend(backend)
    args = _kernel_args(cfg)
    if path == "auto":
        path = "sparse" if W.prefers_sparse else "dense"
    if path == "sparse":
        return kern.run_csr(W.indptr, W.indices, W.data, b, inputs, x0, *args)
    if path == "dense":
        return kern.run_dense(W.dense(), b, inputs, x0, *args)
    raise ReservoirError(f"unknown path {path!r}")


def step(x, u, W: InterconnectionMatrix, b, cfg: ReservoirConfig, **kw) -> np.ndarray:
    """One update ``f_nl(W x + b u)``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (cfg.n_inputs,):
        raise ReservoirError(f"u has shape {u.shape}, expected ({cfg.n_inputs},)")
    return run_sequence(cfg, W, b, u[None, :], x, **kw)[0]


def export_matrices(cfg: ReservoirConfig, W: InterconnectionMatrix, b, directory) -> None:
    """Write ``W.txt`` (dense) and ``b.txt`` in the text matrix format."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_matrix(d / "W.txt", W.dense(), seed=cfg.rng_seed)
    write_matrix(d / "b.txt", b, seed=cfg.rng_seed)


def import_matrices(directory) -> tuple[InterconnectionMatrix, np.ndarray]:
    d = Path(directory)
    W, _ = read_matrix(d / "W.txt")
    b, _ = read_matrix(d / "b.txt")
    return InterconnectionMatrix.from_dense(W), b
