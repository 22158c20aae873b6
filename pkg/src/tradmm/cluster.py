"""Deterministic single-process cluster emulator.

Workers each own one immutable data shard plus a private mutable slot.
Steps run on a small thread pool (numpy releases the GIL for the heavy
kernels) but every collective joins all workers before returning, so the
execution is lockstep.  Reductions always combine worker payloads in
ascending index order, which makes whole runs bitwise reproducible.

Communication is in-process; the byte counters model the wire traffic of
the emulated protocol.  Callers may override the accounted size of a
collective (or mark it diagnostic with zero cost) when the physical payload
of the emulation differs from the message the modeled deployment would send.

The ``TADMM_THREADS`` environment variable caps the number of parallel
lanes; 1 forces serial execution.
"""

import os
import time
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix

__all__ = ["Shard", "Worker", "CommCounters", "CollectiveResult", "Cluster", "spawn"]

THREADS_ENV = "TADMM_THREADS"


@dataclass
class Shard:
    """One worker's immutable slice of the problem data."""

    data: np.ndarray
    targets: np.ndarray | None = None

    def __post_init__(self):
        self.data = as_matrix(self.data, "shard data")
        if self.targets is not None:
            t = np.ascontiguousarray(self.targets, dtype=np.float64)
            if t.shape != (self.data.shape[0],):
                raise ValueError(
                    f"targets shape {t.shape} does not match shard rows {self.data.shape[0]}"
                )
            if not np.all(np.isfinite(t)):
                raise ValueError("targets contain non-finite entries")
            self.targets = t

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]


@dataclass
class CommCounters:
    bytes_up: int = 0
    bytes_down: int = 0
    compute_seconds: float = 0.0
    barrier_seconds: float = 0.0

    def snapshot(self):
        return (self.bytes_up, self.bytes_down, self.compute_seconds, self.barrier_seconds)


@dataclass
class CollectiveResult:
    payload: object
    contributing: int


class Worker:
    """Index, shard, and a private mutable state dict."""

    def __init__(self, index, shard, cluster):
        self.index = index
        self.shard = shard
        self.state = {}
        self._cluster = weakref.ref(cluster)

    @property
    def data(self):
        return self.shard.data

    @property
    def targets(self):
        return self.shard.targets

    @property
    def x(self):
        """Most recently broadcast vector, identical for all workers."""
        return self._cluster().x


def _lane_count(n_workers):
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {cap}")
    else:
        cap = os.cpu_count() or 1
    return min(n_workers, cap)


class Cluster:
    """A fixed set of workers with lockstep collectives and cost counters."""

    def __init__(self, shards, initial_states=None):
        shards = [s if isinstance(s, Shard) else Shard(*s) for s in shards]
        if not shards:
            raise ValueError("cluster needs at least one shard")
        cols = shards[0].cols
        for s in shards[1:]:
            if s.cols != cols:
                raise ValueError(f"inconsistent shard column counts: {s.cols} != {cols}")
        self.workers = [Worker(i, s, self) for i, s in enumerate(shards)]
        if initial_states is not None:
            if len(initial_states) != len(self.workers):
                raise ValueError("one initial state per worker required")
            for w, st in zip(self.workers, initial_states):
                w.state.update(st)
        self.counters = CommCounters()
        self._x = None
        self._pool = None
        self._finalizer = None

    # -- topology ----------------------------------------------------------

    @property
    def n_workers(self):
        return len(self.workers)

    @property
    def n_cols(self):
        return self.workers[0].shard.cols

    @property
    def total_rows(self):
        return sum(w.shard.rows for w in self.workers)

    @property
    def shards(self):
        return [w.shard for w in self.workers]

    @property
    def x(self):
        return self._x

    # -- execution ---------------------------------------------------------

    def _ensure_pool(self, lanes):
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=lanes,
                                            thread_name_prefix="tradmm-worker")
            self._finalizer = weakref.finalize(self, self._pool.shutdown, wait=False)
        return self._pool

    def all_execute(self, step, diagnostic=False):
        """Run ``step(worker)`` on every worker; barrier; outputs by index.

        A worker exception aborts the whole call.  Durations feed the
        compute and barrier-wait counters unless ``diagnostic`` is set
        (diagnostics model work a real deployment would not do).
        """

        def timed(worker):
            t0 = time.perf_counter()
            out = step(worker)
            return out, time.perf_counter() - t0

        lanes = _lane_count(self.n_workers)
        if lanes <= 1:
            pairs = [timed(w) for w in self.workers]
        else:
            pool = self._ensure_pool(lanes)
            futures = [pool.submit(timed, w) for w in self.workers]
            pairs = [f.result() for f in futures]

        durations = [d for _, d in pairs]
        if not diagnostic:
            longest = max(durations)
            self.counters.compute_seconds += sum(durations)
            self.counters.barrier_seconds += sum(longest - d for d in durations)
        return [out for out, _ in pairs]

    # -- collectives -------------------------------------------------------

    def reduce_sum(self, parts, counted_nbytes=None):
        """Sum array payloads in ascending worker order.

        ``counted_nbytes`` overrides the upstream byte accounting: None
        counts the physical payload size, 0 marks a diagnostic reduction,
        any other value records the modeled wire size.
        """
        parts = [np.asarray(p, dtype=np.float64) for p in parts]
        if len(parts) != self.n_workers:
            raise ValueError(f"expected {self.n_workers} payloads, got {len(parts)}")
        shape = parts[0].shape
        for i, p in enumerate(parts[1:], start=1):
            if p.shape != shape:
                raise ValueError(f"payload {i} has shape {p.shape}, expected {shape}")
        total = parts[0].copy()
        for p in parts[1:]:
            total += p
        if counted_nbytes is None:
            counted_nbytes = sum(p.nbytes for p in parts)
        self.counters.bytes_up += int(counted_nbytes)
        return CollectiveResult(payload=total, contributing=len(parts))

    def broadcast(self, x, counted_nbytes=None):
        """Publish a vector to every worker (last writer wins)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.size == 0:
            raise ValueError("cannot broadcast an empty vector")
        if not np.all(np.isfinite(x)):
            raise ValueError("cannot broadcast non-finite values")
        self._x = x.copy()
        if counted_nbytes is None:
            counted_nbytes = x.nbytes * self.n_workers
        self.counters.bytes_down += int(counted_nbytes)
        return self._x

    def account_upload(self, nbytes):
        self.counters.bytes_up += int(nbytes)

    def account_download(self, nbytes):
        self.counters.bytes_down += int(nbytes)

    # -- lifecycle ---------------------------------------------------------

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None
        if self._finalizer is not None:
            self._finalizer.detach()
            self._finalizer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def spawn(shards, initial_states=None):
    """Create a cluster owning one worker per shard."""
    return Cluster(shards, initial_states=initial_states)
