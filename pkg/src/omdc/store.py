"""On-disk formats and the snapshot data model.

Binary matrix format (extension ``.mat``): 8-byte magic ``OMDCMAT1``,
two little-endian u64 values (rows, cols), then rows*cols float64
values little-endian in column-major order. Round trips are bit-exact.

A snapshot set is stored as a directory holding ``S.mat``, ``U.mat``
and ``meta.json`` (sampling interval, field layout, optional
normalization). CSV helpers cover input schedules, trajectory means,
comparison metrics and eigenvalue lists.
"""

import csv
import json
import os
import struct
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    FormatError,
    InsufficientSnapshotsError,
    NumericalError,
)
from .validation import as_matrix

MAGIC = b"OMDCMAT1"
_HEADER = struct.Struct("<8sQQ")

SNAPSHOT_META = "meta.json"


# ---------------------------------------------------------------------------
# binary matrices


def save_matrix(path, a):
    """Write a finite float64 matrix to ``path`` in the binary format."""
    a = as_matrix(a, "matrix")
    rows, cols = a.shape
    payload = np.asfortranarray(a, dtype="<f8").tobytes(order="F")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols))
        fh.write(payload)
    os.replace(tmp, path)


def load_matrix(path):
    """Read a matrix written by :func:`save_matrix`."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        payload = fh.read()
    expect = rows * cols * 8
    if len(payload) != expect:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expect}"
        )
    flat = np.frombuffer(payload, dtype="<f8")
    a = flat.reshape((rows, cols), order="F").astype(np.float64)
    if a.size and not np.isfinite(a).all():
        raise FormatError(f"{path}: non-finite entries in payload")
    return a


# ---------------------------------------------------------------------------
# field layout and normalization


@dataclass(frozen=True)
class FieldSpan:
    """Contiguous block of state-vector rows belonging to one field."""

    name: str
    start: int
    stop: int

    @property
    def size(self):
        return self.stop - self.start


@dataclass(frozen=True)
class FieldNorm:
    """Affine map applied to one field block: x -> (x - shift) / scale."""

    name: str
    start: int
    stop: int
    shift: float
    scale: float


def _check_layout(layout, n_rows):
    pos = 0
    for span in layout:
        if span.start != pos or span.stop <= span.start:
            raise DimensionMismatchError(
                f"field layout must partition rows contiguously, got {span}"
            )
        pos = span.stop
    if pos != n_rows:
        raise DimensionMismatchError(
            f"field layout covers {pos} rows, state has {n_rows}"
        )


def apply_norm(x, norm_spec):
    """Normalize rows of a vector or matrix, per field block."""
    out = np.array(x, dtype=np.float64, copy=True)
    for f in norm_spec:
        out[f.start : f.stop] = (out[f.start : f.stop] - f.shift) / f.scale
    return out


def invert_norm(x, norm_spec):
    """Undo :func:`apply_norm`."""
    out = np.array(x, dtype=np.float64, copy=True)
    for f in norm_spec:
        out[f.start : f.stop] = out[f.start : f.stop] * f.scale + f.shift
    return out


# ---------------------------------------------------------------------------
# snapshot sets


@dataclass(frozen=True)
class SnapshotSet:
    """Uniformly sampled state snapshots with the inputs that drove them.

    s is (n, m): one state column per sample time. u is (p, m-1):
    u[:, k] is the input held over [t_k, t_{k+1}). A norm_spec, when
    present, records the affine map already applied to s per field.
    """

    s: np.ndarray
    u: np.ndarray
    dt_sample: float
    field_layout: tuple
    norm_spec: tuple = None

    def __post_init__(self):
        s = as_matrix(self.s, "s")
        u = as_matrix(self.u, "u")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "field_layout", tuple(self.field_layout))
        if self.norm_spec is not None:
            object.__setattr__(self, "norm_spec", tuple(self.norm_spec))
        if s.shape[1] < 1:
            raise InsufficientSnapshotsError("snapshot set needs at least one column")
        if u.shape[1] != s.shape[1] - 1:
            raise DimensionMismatchError(
                f"u must have one column fewer than s: {u.shape[1]} vs {s.shape[1]}"
            )
        if not self.dt_sample > 0:
            raise NumericalError(f"dt_sample must be positive, got {self.dt_sample}")
        _check_layout(self.field_layout, s.shape[0])
        if self.norm_spec is not None:
            _check_layout(self.norm_spec, s.shape[0])

    @property
    def n_states(self):
        return self.s.shape[0]

    @property
    def n_samples(self):
        return self.s.shape[1]

    @property
    def n_inputs(self):
        return self.u.shape[0]

    @property
    def times(self):
        return np.arange(self.n_samples) * self.dt_sample

    def field(self, name):
        for span in self.field_layout:
            if span.name == name:
                return span
        raise KeyError(f"no field named {name!r}")


def split_snapshots(s):
    """Return the shifted pair (X, Y): X = s[:, :-1], Y = s[:, 1:]."""
    s = as_matrix(s, "s")
    if s.shape[1] < 2:
        raise InsufficientSnapshotsError(
            f"need at least 2 snapshot columns to form a shifted pair, got {s.shape[1]}"
        )
    return s[:, :-1], s[:, 1:]


def stack_omega(x, u):
    """Stack states over inputs into the regressor [X; U]."""
    x = as_matrix(x, "x")
    u = as_matrix(u, "u")
    if x.shape[1] != u.shape[1]:
        raise DimensionMismatchError(
            f"x and u need equal column counts, got {x.shape[1]} and {u.shape[1]}"
        )
    return np.vstack([x, u])


def normalize_fields(snap):
    """Shift-and-scale each field block to zero mean and unit variance.

    Per field: shift = mean over the block and all samples, scale = the
    block's standard deviation (replaced by 1 when below 1e-14, so
    constant fields map to zeros). Returns a new SnapshotSet carrying
    the norm_spec; inputs are left untouched.
    """
    if snap.norm_spec is not None:
        raise NumericalError("snapshot set already carries a normalization")
    spec = []
    s = snap.s.copy()
    for span in snap.field_layout:
        block = s[span.start : span.stop]
        shift = float(block.mean())
        scale = float(block.std())
        if scale < 1e-14:
            scale = 1.0
        s[span.start : span.stop] = (block - shift) / scale
        spec.append(FieldNorm(span.name, span.start, span.stop, shift, scale))
    return replace(snap, s=s, norm_spec=tuple(spec))


def denormalize_fields(snap):
    """Invert :func:`normalize_fields`, restoring original units."""
    if snap.norm_spec is None:
        return snap
    s = invert_norm(snap.s, snap.norm_spec)
    return replace(snap, s=s, norm_spec=None)


# ---------------------------------------------------------------------------
# snapshot-set directories


def _layout_to_json(layout):
    return [{"name": f.name, "start": f.start, "stop": f.stop} for f in layout]


def _layout_from_json(items):
    return tuple(FieldSpan(d["name"], int(d["start"]), int(d["stop"])) for d in items)


def _norm_to_json(norm_spec):
    if norm_spec is None:
        return None
    return [
        {"name": f.name, "start": f.start, "stop": f.stop, "shift": f.shift, "scale": f.scale}
        for f in norm_spec
    ]


def _norm_from_json(items):
    if items is None:
        return None
    return tuple(
        FieldNorm(d["name"], int(d["start"]), int(d["stop"]), float(d["shift"]), float(d["scale"]))
        for d in items
    )


def write_json(path, payload):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def save_snapshots(dirpath, snap):
    """Write a SnapshotSet as a directory (S.mat, U.mat, meta.json)."""
    os.makedirs(dirpath, exist_ok=True)
    save_matrix(os.path.join(dirpath, "S.mat"), snap.s)
    save_matrix(os.path.join(dirpath, "U.mat"), snap.u)
    meta = {
        "dt_sample": snap.dt_sample,
        "field_layout": _layout_to_json(snap.field_layout),
        "norm_spec": _norm_to_json(snap.norm_spec),
    }
    write_json(os.path.join(dirpath, SNAPSHOT_META), meta)


def load_snapshots(dirpath):
    """Read a directory written by :func:`save_snapshots`."""
    meta = read_json(os.path.join(dirpath, SNAPSHOT_META))
    try:
        layout = _layout_from_json(meta["field_layout"])
        norm_spec = _norm_from_json(meta.get("norm_spec"))
        dt = float(meta["dt_sample"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{dirpath}: malformed snapshot metadata ({exc})") from exc
    return SnapshotSet(
        s=load_matrix(os.path.join(dirpath, "S.mat")),
        u=load_matrix(os.path.join(dirpath, "U.mat")),
        dt_sample=dt,
        field_layout=layout,
        norm_spec=norm_spec,
    )


# ---------------------------------------------------------------------------
# CSV helpers


def write_input_csv(path, u, dt_sample, names=None):
    """Input schedule as CSV: header ``t,<name1>,...``, one row per step."""
    u = as_matrix(u, "u")
    p = u.shape[0]
    if names is None:
        names = [f"u{i + 1}" for i in range(p)]
    if len(names) != p:
        raise DimensionMismatchError(f"{len(names)} names for {p} input rows")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + list(names))
        for k in range(u.shape[1]):
            w.writerow([_fmt(k * dt_sample)] + [_fmt(v) for v in u[:, k]])


def read_input_csv(path):
    """Read an input schedule CSV. Returns (u, dt_sample, names).

    Sample times must be uniform; dt_sample falls back to 1.0 when the
    file holds fewer than two rows.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise FormatError(f"{path}: expected header starting with 't'")
    names = rows[0][1:]
    body = [r for r in rows[1:] if r]
    try:
        times = np.array([float(r[0]) for r in body])
        u = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed row ({exc})") from exc
    if body and any(len(r) != len(names) + 1 for r in body):
        raise FormatError(f"{path}: ragged rows")
    u = u.reshape((len(body), len(names))).T
    if times.size >= 2:
        steps = np.diff(times)
        dt = float(steps[0])
        if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
            raise FormatError(f"{path}: sample times are not uniform")
    else:
        dt = 1.0
    return u, dt, names


def write_trajectory_csv(path, times, series):
    """Per-field spatial means over time: header ``t,<field>_mean,...``.

    series is a list of (column_name, 1-D values) pairs, all matching
    len(times).
    """
    for name, vals in series:
        if len(vals) != len(times):
            raise DimensionMismatchError(f"column {name!r} length mismatch")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [name for name, _ in series])
        for k, t in enumerate(times):
            w.writerow([_fmt(t)] + [_fmt(vals[k]) for _, vals in series])


def write_metrics_csv(path, rows):
    """Comparison metrics: header ``field,rel_rms,mean_rel_rms,max_abs_err``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["field", "rel_rms", "mean_rel_rms", "max_abs_err"])
        for name, rel, mean_rel, mx in rows:
            w.writerow([name, _fmt(rel), _fmt(mean_rel), _fmt(mx)])


def write_spectrum_csv(path, values):
    """Eigenvalues as CSV with header ``re,im``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for z in values:
            w.writerow([_fmt(z.real), _fmt(z.imag)])


def _fmt(x):
    return format(float(x), ".17g")
