"""Row-column 2D FFT executed by groups of workers.

The pipeline is the classic row-column decomposition run by ``p`` groups:

1. every group transforms its own contiguous block of rows,
2. the matrix is transposed in place,
3. every group transforms its block again,
4. the matrix is transposed back.

Steps are separated by barriers. Row blocks come from an
:class:`ExecutionPlan` -- one block for the sequential variant, equal blocks
for load balancing, model-optimal blocks for the FPM variants. The padded
variant transforms each group's rows at a longer length in a scratch buffer
and keeps the first ``n`` outputs; this is *not* the ``n``-point DFT and is
checked against :func:`dft2d_padded_reference` instead.

FFTs come from a pluggable :class:`FftBackend`. Plans are cached per group
and created under a global lock; only plan execution runs concurrently.
"""

from __future__ import annotations

import enum
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import as_strided

__all__ = [
    "BackendError",
    "ExecutionError",
    "ExecutionPlan",
    "FftBackend",
    "GroupPlan",
    "NumpyBackend",
    "ScipyBackend",
    "SignalMatrix",
    "Variant",
    "dft1d_naive",
    "dft2d_naive",
    "dft2d_padded_reference",
    "execute",
    "execute_fpm_pad",
    "fpm_plan",
    "get_backend",
    "lb_plan",
    "load_matrix",
    "load_matrix_text",
    "rows_fft_batch",
    "save_matrix",
    "save_matrix_text",
    "sequential_plan",
    "transpose_blocked",
    "workspace_size",
]

NAIVE_LIMIT = 256
DEFAULT_BLOCK_SIZE = 64
# (p, t) presets tuned for a 36-core server
PRESETS = {"2x18": (2, 18), "4x9": (4, 9)}


class BackendError(RuntimeError):
    pass


class ExecutionError(RuntimeError):
    """A group failed; the matrix contents are indeterminate."""

    def __init__(self, message, group_id=None, row_start=None, row_count=None):
        super().__init__(message)
        self.group_id = group_id
        self.row_start = row_start
        self.row_count = row_count


# --- signal matrix ----------------------------------------------------------


class SignalMatrix:
    """``n x n`` complex128 matrix stored row-major with a row stride ``>= n``.

    Columns ``n..row_stride-1`` are physical padding and not part of the
    logical matrix.
    """

    def __init__(self, data, n=None):
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError("matrix data must be 2-D")
        n = data.shape[0] if n is None else n
        if data.shape[0] != n or data.shape[1] < n:
            raise ValueError(f"data of shape {data.shape} cannot hold an {n}x{n} matrix")
        if n < 1:
            raise ValueError("n must be >= 1")
        self.data = np.ascontiguousarray(data, dtype=np.complex128)
        self.n = int(n)
        self.indeterminate = False

    @classmethod
    def zeros(cls, n, row_stride=None):
        return cls(np.zeros((n, row_stride or n), dtype=np.complex128), n)

    @classmethod
    def random(cls, n, seed=0):
        """Uniform random entries with real and imaginary parts in [-1, 1]."""
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(-1, 1, (n, n)) + 1j * rng.uniform(-1, 1, (n, n)))

    @property
    def row_stride(self):
        return self.data.shape[1]

    @property
    def view(self):
        """The logical ``n x n`` part."""
        return self.data[:, : self.n]

    def flat(self):
        return self.data.reshape(-1)

    def copy(self):
        return SignalMatrix(self.data.copy(), self.n)

    def __repr__(self):
        return f"SignalMatrix(n={self.n}, row_stride={self.row_stride})"


_MAGIC = b"FPMFFTM1"
_HEADER = struct.Struct("<8sQQ")


def save_matrix(path, m: SignalMatrix):
    """Raw little-endian interleaved doubles after a (magic, n, stride) header."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, m.n, m.row_stride))
        fh.write(m.data.astype("<c16", copy=False).tobytes())


def load_matrix(path) -> SignalMatrix:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, n, stride = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a matrix file (bad magic)")
        payload = fh.read()
    expected = n * stride * 16
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} data bytes, found {len(payload)}")
    data = np.frombuffer(payload, dtype="<c16").reshape(n, stride)
    return SignalMatrix(data.astype(np.complex128), n)


def save_matrix_text(path, m: SignalMatrix):
    """One row per line as whitespace-separated ``re im`` pairs."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={m.n}\n")
        for row in m.view:
            fh.write(" ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in row) + "\n")


def load_matrix_text(path) -> SignalMatrix:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = np.array(line.split(), dtype=np.float64)
            if vals.size % 2:
                raise ValueError(f"{path}: odd number of values in a row")
            rows.append(vals[0::2] + 1j * vals[1::2])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError(f"{path}: matrix must be square and non-empty")
    return SignalMatrix(np.array(rows))


# --- oracles ----------------------------------------------------------------


def _dft_matrix(n_out, length, n_in=None):
    """``W[k, j] = exp(-2 pi i k j / length)`` for ``k < n_out``, ``j < n_in``."""
    n_in = length if n_in is None else n_in
    k = np.arange(n_out)[:, None]
    j = np.arange(n_in)[None, :]
    # reduce the exponent mod length before scaling to keep the phase exact
    return np.exp(-2j * np.pi * ((k * j) % length) / length)


def dft1d_naive(v):
    v = np.asarray(v, dtype=np.complex128)
    return _dft_matrix(v.size, v.size) @ v


def dft2d_naive(m: SignalMatrix) -> SignalMatrix:
    """Direct evaluation of the 2D DFT from its defining double sum."""
    if m.row_stride != m.n:
        raise ValueError("naive DFT needs an unpadded matrix")
    if m.n > NAIVE_LIMIT:
        raise ValueError(f"naive DFT refused for n={m.n} > {NAIVE_LIMIT}")
    w = _dft_matrix(m.n, m.n)
    return SignalMatrix(w @ m.view @ w.T)


def dft2d_padded_reference(m: SignalMatrix, counts: Sequence[int], lengths: Sequence[int]) -> SignalMatrix:
    """Direct evaluation of what the padded pipeline computes.

    Rows owned by group ``g`` are transformed at length ``lengths[g]`` with the
    input zero-extended and the output truncated to ``n``; the matrix is
    transposed, the same row ownership and lengths apply again, and the
    result is transposed back.
    """
    n = m.n
    if m.n > NAIVE_LIMIT:
        raise ValueError(f"reference refused for n={n} > {NAIVE_LIMIT}")
    if sum(counts) != n or len(counts) != len(lengths):
        raise ValueError("counts must sum to n with one length per group")
    owner = np.repeat(np.arange(len(counts)), counts)
    mats = {v: _dft_matrix(n, v, n) for v in set(lengths)}

    def row_pass(a):
        out = np.empty_like(a)
        for r in range(n):
            out[r] = mats[lengths[owner[r]]] @ a[r]
        return out

    a = row_pass(m.view.copy()).T.copy()
    a = row_pass(a).T.copy()
    return SignalMatrix(a)


# --- backends ---------------------------------------------------------------


_PLAN_LOCK = threading.Lock()


@dataclass(frozen=True)
class BatchPlan:
    """``howmany`` forward in-place transforms of ``length`` elements.

    Element ``j`` of transform ``b`` lives at ``offset + b * idist + j * istride``
    of the flat buffer passed to :meth:`execute`.
    """

    backend: "FftBackend"
    length: int
    howmany: int
    istride: int
    idist: int
    workers: int

    def execute(self, buffer, offset=0):
        if self.howmany == 0:
            return
        buf = np.asarray(buffer)
        if buf.ndim != 1 or buf.dtype != np.complex128:
            raise BackendError("buffer must be a flat complex128 array")
        last = offset + (self.howmany - 1) * self.idist + (self.length - 1) * self.istride
        if offset < 0 or last >= buf.size:
            raise BackendError(f"plan touches element {last} beyond buffer of {buf.size}")
        base = buf[offset:]
        elem = base.strides[0]
        view = as_strided(base, shape=(self.howmany, self.length),
                          strides=(self.idist * elem, self.istride * elem))
        view[...] = self.backend._transform(view, self.workers)


class FftBackend:
    """Batched forward 1D complex FFTs of arbitrary length.

    Subclasses implement :meth:`_transform` on a ``(howmany, length)`` array;
    the base class supplies plan construction, caching and buffer addressing.
    """

    name = "abstract"

    def __init__(self):
        self._plans = {}

    def plan_many(self, length, howmany, istride=1, idist=None, workers=1, group_id=0) -> BatchPlan:
        idist = length if idist is None else idist
        if length < 1 or howmany < 0 or istride < 1 or idist < 1:
            raise BackendError(f"bad plan geometry length={length} howmany={howmany}")
        key = (group_id, length, howmany, istride, idist, workers)
        with _PLAN_LOCK:
            plan = self._plans.get(key)
            if plan is None:
                plan = self._plans[key] = BatchPlan(self, length, howmany, istride, idist, workers)
        return plan

    def clear_plans(self):
        with _PLAN_LOCK:
            self._plans.clear()

    def _transform(self, a, workers):
        raise NotImplementedError


class ScipyBackend(FftBackend):
    """pocketfft via :mod:`scipy.fft`; ``workers`` threads per batch."""

    name = "scipy"

    def _transform(self, a, workers):
        return scipy.fft.fft(a, axis=-1, workers=workers)


class NumpyBackend(FftBackend):
    """Single-threaded :mod:`numpy.fft`."""

    name = "numpy"

    def _transform(self, a, workers):
        return np.fft.fft(a, axis=-1)


BACKENDS = {"scipy": ScipyBackend, "numpy": NumpyBackend}


def get_backend(name="scipy") -> FftBackend:
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None


# --- building blocks --------------------------------------------------------


def rows_fft_batch(backend: FftBackend, m: SignalMatrix, row_start, row_count, length_s=None,
                   workers=1, group_id=0):
    """Forward FFT of the first ``length_s`` elements of each row in the block, in place."""
    length_s = m.n if length_s is None else length_s
    if row_start < 0 or row_count < 0 or row_start + row_count > m.n:
        raise ValueError(f"rows {row_start}..{row_start + row_count} outside 0..{m.n}")
    if not 1 <= length_s <= m.row_stride:
        raise ValueError(f"length {length_s} exceeds row stride {m.row_stride}")
    if row_count == 0:
        return
    plan = backend.plan_many(length_s, row_count, 1, m.row_stride, workers, group_id)
    try:
        plan.execute(m.flat(), row_start * m.row_stride)
    except Exception as exc:
        raise ExecutionError(
            f"group {group_id}: backend failed on rows {row_start}..{row_start + row_count}: {exc}",
            group_id, row_start, row_count,
        ) from exc


def _tiles(n, block_size):
    return [(i, j) for i in range(0, n, block_size) for j in range(i, n, block_size)]


def _swap_tile(a, i, j, b):
    n = a.shape[0]
    ie, je = min(i + b, n), min(j + b, n)
    if i == j:
        a[i:ie, i:ie] = a[i:ie, i:ie].T.copy()
    else:
        tmp = a[i:ie, j:je].copy()
        a[i:ie, j:je] = a[j:je, i:ie].T
        a[j:je, i:ie] = tmp.T


def transpose_blocked(m: SignalMatrix, block_size=DEFAULT_BLOCK_SIZE, workers=1):
    """In-place transpose by square tiles; ragged edge tiles are clipped.

    Each tile above the diagonal is swapped with its mirror exactly once.
    Tiles are disjoint, so with ``workers > 1`` they are processed
    concurrently without further synchronisation.
    """
    if m.row_stride != m.n:
        raise ValueError("transpose needs an unpadded matrix")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    a = m.data
    tiles = _tiles(m.n, block_size)
    if workers <= 1 or len(tiles) < 2:
        for i, j in tiles:
            _swap_tile(a, i, j, block_size)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda ij: _swap_tile(a, ij[0], ij[1], block_size), tiles))


# --- plans ------------------------------------------------------------------


class Variant(enum.Enum):
    SEQUENTIAL = "seq"
    LB = "lb"
    FPM = "fpm"
    FPM_PAD = "fpm-pad"


@dataclass(frozen=True)
class GroupPlan:
    group_id: int
    workers: int
    row_start: int
    row_count: int
    padded_length: int


@dataclass(frozen=True)
class ExecutionPlan:
    n: int
    variant: Variant
    groups: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ValueError("a plan needs at least one group")
        pos = 0
        for g in self.groups:
            if g.row_start != pos or g.row_count < 0:
                raise ValueError(f"group {g.group_id}: rows must be contiguous and ordered")
            if g.padded_length < self.n:
                raise ValueError(f"group {g.group_id}: padded length {g.padded_length} < n={self.n}")
            if g.workers < 1:
                raise ValueError(f"group {g.group_id}: workers must be >= 1")
            pos += g.row_count
        if pos != self.n:
            raise ValueError(f"row blocks cover {pos} rows, expected {self.n}")
        if self.variant is Variant.SEQUENTIAL and len(self.groups) != 1:
            raise ValueError("sequential plan has exactly one group")
        if self.variant is Variant.LB:
            p = len(self.groups)
            if any(abs(g.row_count - self.n / p) > 1 for g in self.groups):
                raise ValueError("load-balanced blocks must differ from n/p by at most one row")
        if self.variant is not Variant.FPM_PAD and any(g.padded_length != self.n for g in self.groups):
            raise ValueError("only the padded variant may pad rows")

    @property
    def counts(self):
        return [g.row_count for g in self.groups]

    @property
    def padded_lengths(self):
        return [g.padded_length for g in self.groups]


def sequential_plan(n, workers=1):
    return ExecutionPlan(n, Variant.SEQUENTIAL, [GroupPlan(1, workers, 0, n, n)])


def lb_plan(n, p, workers=1):
    base, extra = divmod(n, p)
    counts = [base + (1 if i < extra else 0) for i in range(p)]
    return _blocks(n, Variant.LB, counts, workers, [n] * p)


def fpm_plan(counts, n, workers=1, padded_lengths=None):
    """Plan for a model-derived distribution; padded lengths make it the padded variant."""
    counts = list(getattr(counts, "counts", counts))
    if padded_lengths is None:
        return _blocks(n, Variant.FPM, counts, workers, [n] * len(counts))
    return _blocks(n, Variant.FPM_PAD, counts, workers, list(padded_lengths))


def _blocks(n, variant, counts, workers, lengths):
    groups, start = [], 0
    for gid, (c, v) in enumerate(zip(counts, lengths), start=1):
        groups.append(GroupPlan(gid, workers, start, c, v))
        start += c
    return ExecutionPlan(n, variant, groups)


# --- execution --------------------------------------------------------------


def _run_step(pool, plan, fn, m):
    """Run ``fn(group)`` for all groups concurrently and wait for every one (barrier)."""
    futures = [(g, pool.submit(fn, g)) for g in plan.groups]
    errors = []
    for g, fut in futures:
        exc = fut.exception()
        if exc is not None:
            errors.append((g, exc))
    if errors:
        m.indeterminate = True
        g, exc = errors[0]
        if isinstance(exc, ExecutionError):
            raise exc
        raise ExecutionError(f"group {g.group_id} failed: {exc}", g.group_id, g.row_start, g.row_count) from exc


def execute(plan: ExecutionPlan, m: SignalMatrix, backend: FftBackend = None,
            block_size=DEFAULT_BLOCK_SIZE, transpose_workers=1, workspace=None):
    """Run the four-step pipeline in place, leaving the 2D DFT of ``m`` (padded variant: see module doc)."""
    if plan.variant is Variant.FPM_PAD:
        return execute_fpm_pad(plan, m, backend, workspace, block_size, transpose_workers)
    backend = backend or ScipyBackend()
    _check(plan, m)

    def rows(g):
        rows_fft_batch(backend, m, g.row_start, g.row_count, m.n, g.workers, g.group_id)

    with ThreadPoolExecutor(max_workers=len(plan.groups)) as pool:
        _run_step(pool, plan, rows, m)
        transpose_blocked(m, block_size, transpose_workers)
        _run_step(pool, plan, rows, m)
        transpose_blocked(m, block_size, transpose_workers)


def _check(plan, m):
    if plan.n != m.n:
        raise ValueError(f"plan is for n={plan.n}, matrix has n={m.n}")
    if m.row_stride != m.n:
        raise ValueError("pipeline expects an unpadded matrix")


def workspace_size(plan: ExecutionPlan):
    """Scratch elements the padded pipeline needs: one region per padded group."""
    return sum(g.row_count * g.padded_length for g in plan.groups if g.padded_length > plan.n)


def execute_fpm_pad(plan: ExecutionPlan, m: SignalMatrix, backend: FftBackend = None, workspace=None,
                    block_size=DEFAULT_BLOCK_SIZE, transpose_workers=1):
    """Padded pipeline: each group copies its rows into scratch at its padded
    length, zeroes the tail, transforms, and copies the first ``n`` outputs back.

    The pad lengths are reused for the second row pass. Groups whose padded
    length equals ``n`` transform in place exactly as the unpadded pipeline.
    """
    backend = backend or ScipyBackend()
    _check(plan, m)
    n = m.n
    need = workspace_size(plan)
    if workspace is None:
        workspace = np.empty(need, dtype=np.complex128)
    workspace = np.asarray(workspace)
    if workspace.ndim != 1 or workspace.dtype != np.complex128:
        raise ValueError("workspace must be a flat complex128 array")
    if workspace.size < need:
        raise ValueError(f"workspace holds {workspace.size} elements, plan needs {need}")

    regions, off = {}, 0
    for g in plan.groups:
        if g.padded_length > n:
            size = g.row_count * g.padded_length
            regions[g.group_id] = workspace[off:off + size]
            off += size

    def rows(g):
        if g.padded_length == n:
            rows_fft_batch(backend, m, g.row_start, g.row_count, n, g.workers, g.group_id)
            return
        if g.row_count == 0:
            return
        v = g.padded_length
        scratch = regions[g.group_id].reshape(g.row_count, v)
        scratch[:, :n] = m.data[g.row_start:g.row_start + g.row_count, :n]
        scratch[:, n:] = 0
        plan_ = backend.plan_many(v, g.row_count, 1, v, g.workers, g.group_id)
        try:
            plan_.execute(regions[g.group_id], 0)
        except Exception as exc:
            raise ExecutionError(
                f"group {g.group_id}: backend failed on padded rows "
                f"{g.row_start}..{g.row_start + g.row_count}: {exc}",
                g.group_id, g.row_start, g.row_count,
            ) from exc
        m.data[g.row_start:g.row_start + g.row_count, :n] = scratch[:, :n]

    with ThreadPoolExecutor(max_workers=len(plan.groups)) as pool:
        _run_step(pool, plan, rows, m)
        transpose_blocked(m, block_size, transpose_workers)
        _run_step(pool, plan, rows, m)
        transpose_blocked(m, block_size, transpose_workers)
