"""Synthetic problem generators, shard partitioning, and dataset files.

Everything here is a pure function of its arguments; randomness comes from
counter-based Philox streams keyed by ``(seed, purpose)`` so regenerating
the same recipe always yields bitwise-identical data, and so the matrix,
support, noise, and heterogeneity draws never interleave.
"""

import os
import struct
import tempfile

import numpy as np

from .cluster import Shard

__all__ = [
    "SyntheticRecipe", "stream_rng", "gen_lasso", "gen_classification",
    "heterogenize", "partition_rows", "partition_cols", "append_bias_column",
    "save_dataset", "load_dataset",
]

# purpose indices for stream_rng; fixed so stored seeds stay meaningful
STREAM_MATRIX = 0
STREAM_SUPPORT = 1
STREAM_NOISE = 2
STREAM_HETERO = 3
STREAM_SHUFFLE = 4

_MAGIC = b"TADM"
_BINARY_VERSION = 1
# target-kind byte: 0 none, 1 real-valued, 2 binary labels
_KIND_NONE, _KIND_REAL, _KIND_LABELS = 0, 1, 2


def stream_rng(seed, stream):
    """Philox generator for one named purpose under one seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


class SyntheticRecipe:
    """Parameters for one generated problem instance.

    Parameters
    ----------
    kind : {"lasso", "classification"}
    m, n : int
        Rows and features, both at least 1.
    seed : int
    sparsity : int
        Number of active (unit-magnitude) coefficients for lasso data.
    noise_sigma : float
        Observation noise scale for lasso data.
    heterogeneous : bool
        Marker consumed by callers that shard and then perturb; the
        generators themselves always produce the homogeneous instance.
    """

    def __init__(self, kind, m, n, seed=0, sparsity=10, noise_sigma=1.0,
                 heterogeneous=False):
        if kind not in ("lasso", "classification"):
            raise ValueError(f"unknown recipe kind {kind!r}")
        if m < 1 or n < 1:
            raise ValueError("m and n must be at least 1")
        if sparsity < 0 or sparsity > n:
            raise ValueError(f"sparsity {sparsity} out of range for n={n}")
        self.kind = kind
        self.m = int(m)
        self.n = int(n)
        self.seed = int(seed)
        self.sparsity = int(sparsity)
        self.noise_sigma = float(noise_sigma)
        self.heterogeneous = bool(heterogeneous)


def gen_lasso(recipe):
    """Generate (D, b, x_true, mu) for a sparse regression instance.

    D is standard Gaussian, x_true has ``recipe.sparsity`` entries of
    magnitude one at random positions, and b = D x_true plus Gaussian noise.
    The penalty follows the ten-percent rule: one tenth of the smallest
    weight that forces the all-zero solution, which is ``||D^T b||_inf``.
    """
    if recipe.kind != "lasso":
        raise ValueError("gen_lasso needs a lasso recipe")
    m, n = recipe.m, recipe.n
    D = stream_rng(recipe.seed, STREAM_MATRIX).standard_normal((m, n))
    support_rng = stream_rng(recipe.seed, STREAM_SUPPORT)
    x_true = np.zeros(n)
    if recipe.sparsity:
        where = support_rng.choice(n, size=recipe.sparsity, replace=False)
        signs = np.where(support_rng.random(recipe.sparsity) < 0.5, -1.0, 1.0)
        x_true[where] = signs
    b = D @ x_true
    if recipe.noise_sigma > 0:
        b = b + recipe.noise_sigma * stream_rng(recipe.seed, STREAM_NOISE).standard_normal(m)
    mu = 0.1 * float(np.max(np.abs(D.T @ b))) if m and n else 0.0
    return D, b, x_true, mu


def gen_classification(recipe):
    """Generate (D, labels) for a two-class problem that is not separable.

    Class -1 rows are standard Gaussian.  Class +1 rows get a unit mean
    shift in the first five columns, so at least five features are needed.
    Classes are split evenly (+1 takes the odd row when m is odd) and the
    rows are then shuffled with a seeded permutation.
    """
    if recipe.kind != "classification":
        raise ValueError("gen_classification needs a classification recipe")
    if recipe.n < 5:
        raise ValueError("classification recipe needs n >= 5")
    m, n = recipe.m, recipe.n
    m_minus = m // 2
    D = stream_rng(recipe.seed, STREAM_MATRIX).standard_normal((m, n))
    D[m_minus:, :5] += 1.0
    labels = np.concatenate([-np.ones(m_minus), np.ones(m - m_minus)])
    perm = stream_rng(recipe.seed, STREAM_SHUFFLE).permutation(m)
    return D[perm], labels[perm]


def heterogenize(shards, seed, scalars=None):
    """Shift each shard's matrix by its own Gaussian scalar.

    Models nodes whose local data distributions disagree: every entry of
    shard i gains c_i, targets are untouched.  Returns new shards.  Pass
    ``scalars`` to pin the shifts (e.g. zeros for an identity check).
    """
    if not shards:
        raise ValueError("heterogenize needs at least one shard")
    if scalars is None:
        scalars = stream_rng(seed, STREAM_HETERO).standard_normal(len(shards))
    else:
        scalars = np.asarray(scalars, dtype=np.float64)
        if scalars.shape != (len(shards),):
            raise ValueError(f"need {len(shards)} scalars, got shape {scalars.shape}")
    return [Shard(data=s.data + c, targets=s.targets) for s, c in zip(shards, scalars)]


def _split_sizes(total, n_parts):
    if n_parts < 1 or n_parts > total:
        raise ValueError(f"cannot split {total} into {n_parts} parts")
    base, extra = divmod(total, n_parts)
    return [base + (1 if i < extra else 0) for i in range(n_parts)]


def partition_rows(D, targets, n_parts):
    """Split into contiguous balanced row blocks (earlier blocks larger).

    Vertically restacking the shard matrices (and targets) reproduces the
    input bitwise.
    """
    D = np.asarray(D, dtype=np.float64)
    sizes = _split_sizes(D.shape[0], n_parts)
    shards, start = [], 0
    for size in sizes:
        stop = start + size
        t = None if targets is None else np.ascontiguousarray(targets[start:stop], dtype=np.float64)
        shards.append(Shard(data=D[start:stop].copy(), targets=t))
        start = stop
    return shards


def partition_cols(D, n_parts):
    """Split into contiguous balanced column blocks, returned as arrays."""
    D = np.asarray(D, dtype=np.float64)
    sizes = _split_sizes(D.shape[1], n_parts)
    blocks, start = [], 0
    for size in sizes:
        blocks.append(np.ascontiguousarray(D[:, start:start + size]))
        start += size
    return blocks


def append_bias_column(D):
    """Add a trailing all-ones column (intercept feature)."""
    D = np.asarray(D, dtype=np.float64)
    return np.hstack([D, np.ones((D.shape[0], 1))])


def _target_kind(targets):
    if targets is None:
        return _KIND_NONE
    values = np.unique(np.asarray(targets, dtype=np.float64))
    if values.size and np.all(np.isin(values, (-1.0, 1.0))):
        return _KIND_LABELS
    return _KIND_REAL


def save_dataset(path, D, targets=None, format="binary"):
    """Write a matrix and optional target vector to ``path``.

    Binary files round-trip bitwise; text files round-trip value-exact via
    17-significant-digit formatting.  Files appear atomically (temp file in
    the same directory, then rename).
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    if D.ndim != 2:
        raise ValueError("dataset matrix must be 2-D")
    if targets is not None:
        targets = np.ascontiguousarray(targets, dtype=np.float64)
        if targets.shape != (D.shape[0],):
            raise ValueError(f"targets shape {targets.shape} does not match {D.shape[0]} rows")
    if format not in ("binary", "text"):
        raise ValueError(f"unknown format {format!r}")
    kind = _target_kind(targets)
    m, n = D.shape

    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".dataset-")
    try:
        if format == "binary":
            with os.fdopen(fd, "wb") as fh:
                fh.write(_MAGIC)
                fh.write(struct.pack("<IQQB", _BINARY_VERSION, m, n, kind))
                fh.write(D.astype("<f8").tobytes(order="C"))
                if targets is not None:
                    fh.write(targets.astype("<f8").tobytes())
        else:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write("# dataset: rows of the design matrix, then one target per line\n")
                fh.write(f"{m} {n} {kind}\n")
                for row in D:
                    fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
                if targets is not None:
                    for v in targets:
                        fh.write(f"{v:.17g}\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class DatasetFormatError(ValueError):
    """Raised for malformed or truncated dataset files."""


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise DatasetFormatError(f"truncated file: expected {count} bytes of {what}, "
                                 f"got {len(data)} (offset {fh.tell() - len(data)})")
    return data


def load_dataset(path):
    """Read a dataset saved by :func:`save_dataset`.

    The format is detected from the leading bytes.  Returns
    ``(D, targets)`` with ``targets`` None when the file stores none.
    """
    with open(path, "rb") as fh:
        if fh.read(4) == _MAGIC:
            version, m, n, kind = struct.unpack("<IQQB", _read_exact(fh, 21, "header"))
            if version != _BINARY_VERSION:
                raise DatasetFormatError(f"unsupported dataset version {version}")
            if kind not in (_KIND_NONE, _KIND_REAL, _KIND_LABELS):
                raise DatasetFormatError(f"unknown target kind {kind}")
            D = np.frombuffer(_read_exact(fh, 8 * m * n, "matrix"), dtype="<f8")
            D = D.reshape(m, n).astype(np.float64, copy=True)
            targets = None
            if kind != _KIND_NONE:
                targets = np.frombuffer(_read_exact(fh, 8 * m, "targets"), dtype="<f8")
                targets = targets.astype(np.float64, copy=True)
            if fh.read(1):
                raise DatasetFormatError("trailing bytes after dataset payload")
            return D, targets
    return _load_text(path)


def _load_text(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    rows = [(i + 1, ln.strip()) for i, ln in enumerate(lines)]
    rows = [(no, ln) for no, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise DatasetFormatError(f"{path}: no header line")
    head_no, head = rows[0]
    parts = head.split()
    if len(parts) != 3:
        raise DatasetFormatError(f"{path}:{head_no}: header must be 'm n kind'")
    try:
        m, n, kind = (int(p) for p in parts)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}:{head_no}: non-integer header field") from exc
    if kind not in (_KIND_NONE, _KIND_REAL, _KIND_LABELS):
        raise DatasetFormatError(f"{path}:{head_no}: unknown target kind {kind}")
    want = m + (m if kind != _KIND_NONE else 0)
    body = rows[1:]
    if len(body) != want:
        raise DatasetFormatError(f"{path}: expected {want} data lines, found {len(body)}")
    D = np.empty((m, n))
    for r in range(m):
        no, ln = body[r]
        fields = ln.split()
        if len(fields) != n:
            raise DatasetFormatError(f"{path}:{no}: expected {n} values, found {len(fields)}")
        try:
            D[r] = [float(f) for f in fields]
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{no}: bad float") from exc
    targets = None
    if kind != _KIND_NONE:
        targets = np.empty(m)
        for r in range(m):
            no, ln = body[m + r]
            fields = ln.split()
            if len(fields) != 1:
                raise DatasetFormatError(f"{path}:{no}: expected one target value")
            try:
                targets[r] = float(fields[0])
            except ValueError as exc:
                raise DatasetFormatError(f"{path}:{no}: bad float") from exc
    return D, targets
