"""Reduced-order model container, replay, spectra and comparison.

A RomModel is the triple (modes, dynamics, input_map): an orthonormal
basis L (n x r) plus the reduced one-step map a_{k+1} = M a_k + P u_k.
The full-state reconstruction is x_k ~= L a_k, undoing any field
normalization the model was trained under.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import store
from .exceptions import DimensionMismatchError, FormatError
from .validation import as_matrix, as_vector, check_orthonormal

MODEL_META = "meta.json"


@dataclass(frozen=True)
class RomModel:
    """Identified reduced-order linear model with control inputs."""

    modes: np.ndarray
    dynamics: np.ndarray
    input_map: np.ndarray
    method: str
    dt_sample: float
    norm_spec: tuple = None
    field_layout: tuple = None
    solver_info: dict = field(default=None, compare=False)

    def __post_init__(self):
        modes = as_matrix(self.modes, "modes")
        dyn = as_matrix(self.dynamics, "dynamics")
        imap = as_matrix(self.input_map, "input_map")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "dynamics", dyn)
        object.__setattr__(self, "input_map", imap)
        n, r = modes.shape
        if r > n:
            raise DimensionMismatchError(f"more modes than states: {r} > {n}")
        if dyn.shape != (r, r):
            raise DimensionMismatchError(
                f"dynamics must be {r} x {r}, got {dyn.shape}"
            )
        if imap.shape[0] != r:
            raise DimensionMismatchError(
                f"input_map must have {r} rows, got {imap.shape[0]}"
            )
        if not self.dt_sample > 0:
            raise DimensionMismatchError(
                f"dt_sample must be positive, got {self.dt_sample}"
            )
        check_orthonormal(modes, tol=1e-10, name="modes")
        if self.norm_spec is not None:
            object.__setattr__(self, "norm_spec", tuple(self.norm_spec))
        if self.field_layout is not None:
            object.__setattr__(self, "field_layout", tuple(self.field_layout))

    @property
    def n_states(self):
        return self.modes.shape[0]

    @property
    def order(self):
        return self.modes.shape[1]

    @property
    def n_inputs(self):
        return self.input_map.shape[1]


@dataclass(frozen=True)
class RomTrajectory:
    """Reduced-coordinate trajectory: coeffs[:, k] at times[k]."""

    times: np.ndarray
    coeffs: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by magnitude (descending), then phase (ascending)."""

    values: np.ndarray


def eigenvalues(dynamics):
    """Spectrum of a reduced dynamics matrix, deterministically ordered."""
    dyn = as_matrix(dynamics, "dynamics")
    if dyn.shape[0] != dyn.shape[1]:
        raise DimensionMismatchError(f"dynamics must be square, got {dyn.shape}")
    vals = np.linalg.eigvals(dyn)
    order = np.lexsort((np.angle(vals), -np.abs(vals)))
    return Spectrum(values=vals[order])


def project_state(model, x):
    """Reduced coordinates of a full state given in original units."""
    x = as_vector(x, "x")
    if x.size != model.n_states:
        raise DimensionMismatchError(
            f"state has {x.size} entries, model expects {model.n_states}"
        )
    if model.norm_spec is not None:
        x = store.apply_norm(x, model.norm_spec)
    return model.modes.T @ x

def lift(model, coeffs):
    """Full states in original units from reduced coordinates."""
    a = np.asarray(coeffs, dtype=np.float64)
    x = model.modes @ a
    if model.norm_spec is not None:
        x = store.invert_norm(x, model.norm_spec)
    return x


def simulate(model, x0, u_seq):
    """Iterate the reduced map from a full initial state.

    u_seq is (p, K); the result holds K+1 reduced states at multiples
    of the model's sampling interval.
    """
    u = as_matrix(u_seq, "u_seq")
    if u.shape[0] != model.n_inputs:
        raise DimensionMismatchError(
            f"u_seq has {u.shape[0]} input rows, model expects {model.n_inputs}"
        )
    n_steps = u.shape[1]
    a = np.empty((model.order, n_steps + 1))
    a[:, 0] = project_state(model, x0)
    m, p = model.dynamics, model.input_map
    for k in range(n_steps):
        a[:, k + 1] = m @ a[:, k] + p @ u[:, k]
    times = np.arange(n_steps + 1) * model.dt_sample
    return RomTrajectory(times=times, coeffs=a)


def one_step_cost(modes, dynamics, input_map, x, y, u):
    """Squared Frobenius one-step residual ||Y - L M L^T X - L P U||^2."""
    resid = y - modes @ (dynamics @ (modes.T @ x) + input_map @ u)
    return float(np.sum(resid * resid))


# ---------------------------------------------------------------------------
# comparison against reference data


@dataclass(frozen=True)
class CompareResult:
    """Replay-versus-reference summary.

    Mean series are spatial means per field; rel_rms and max_abs_err
    are computed over the full space-time block of each field, while
    mean_rel_rms scores only the spatial-mean trajectories.
    """

    times: np.ndarray
    field_names: tuple
    ref_means: dict
    rom_means: dict
    rel_rms: dict
    mean_rel_rms: dict
    max_abs_err: dict


def compare(model, reference, fields=None):
    """Replay the reference inputs through the model and measure the gap.

    The model is started from the reference's first snapshot and driven
    by the reference's input sequence; errors are evaluated in original
    units, per field.
    """
    ref = store.denormalize_fields(reference)
    if model.n_states != ref.n_states:
        raise DimensionMismatchError(
            f"model has {model.n_states} states, reference {ref.n_states}"
        )
    if abs(model.dt_sample - ref.dt_sample) > 1e-9 * max(model.dt_sample, ref.dt_sample):
        raise DimensionMismatchError(
            f"sampling mismatch: model dt={model.dt_sample}, reference dt={ref.dt_sample}"
        )
    layout = ref.field_layout
    if fields is not None:
        layout = tuple(ref.field(name) for name in fields)
    traj = simulate(model, ref.s[:, 0], ref.u)
    replay = lift(model, traj.coeffs)
    ref_means, rom_means, rel_rms, mean_rel_rms, max_abs = {}, {}, {}, {}, {}
    for span in layout:
        a = ref.s[span.start : span.stop]
        b = replay[span.start : span.stop]
        ma = a.mean(axis=0)
        mb = b.mean(axis=0)
        ref_means[span.name] = ma
        rom_means[span.name] = mb
        rel_rms[span.name] = _rel_rms(b - a, a)
        mean_rel_rms[span.name] = _rel_rms(mb - ma, ma)
        max_abs[span.name] = float(np.abs(b - a).max())
    return CompareResult(
        times=traj.times,
        field_names=tuple(span.name for span in layout),
        ref_means=ref_means,
        rom_means=rom_means,
        rel_rms=rel_rms,
        mean_rel_rms=mean_rel_rms,
        max_abs_err=max_abs,
    )


def _rel_rms(err, ref):
    denom = np.sqrt(np.mean(np.asarray(ref) ** 2))
    rms = np.sqrt(np.mean(np.asarray(err) ** 2))
    return float(rms / denom) if denom > 0 else float("inf")


# ---------------------------------------------------------------------------
# persistence


def save_model(dirpath, model):
    """Write a RomModel as a directory (L.mat, M.mat, P.mat, meta.json)."""
    os.makedirs(dirpath, exist_ok=True)
    store.save_matrix(os.path.join(dirpath, "L.mat"), model.modes)
    store.save_matrix(os.path.join(dirpath, "M.mat"), model.dynamics)
    store.save_matrix(os.path.join(dirpath, "P.mat"), model.input_map)
    meta = {
        "method": model.method,
        "r": model.order,
        "n": model.n_states,
        "p": model.n_inputs,
        "dt_sample": model.dt_sample,
        "norm_spec": store._norm_to_json(model.norm_spec),
        "field_layout": (
            store._layout_to_json(model.field_layout)
            if model.field_layout is not None
            else None
        ),
        "solver": model.solver_info,
    }
    store.write_json(os.path.join(dirpath, MODEL_META), meta)


def load_model(dirpath):
    """Read a directory written by :func:`save_model`."""
    meta = store.read_json(os.path.join(dirpath, MODEL_META))
    try:
        method = meta["method"]
        dt = float(meta["dt_sample"])
        declared = (int(meta["n"]), int(meta["r"]), int(meta["p"]))
        norm_spec = store._norm_from_json(meta.get("norm_spec"))
        layout = meta.get("field_layout")
        layout = store._layout_from_json(layout) if layout is not None else None
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{dirpath}: malformed model metadata ({exc})") from exc
    model = RomModel(
        modes=store.load_matrix(os.path.join(dirpath, "L.mat")),
        dynamics=store.load_matrix(os.path.join(dirpath, "M.mat")),
        input_map=store.load_matrix(os.path.join(dirpath, "P.mat")),
        method=method,
        dt_sample=dt,
        norm_spec=norm_spec,
        field_layout=layout,
        solver_info=meta.get("solver"),
    )
    actual = (model.n_states, model.order, model.n_inputs)
    if declared != actual:
        raise FormatError(
            f"{dirpath}: metadata sizes {declared} disagree with matrices {actual}"
        )
    return model
