"""Reduced-order linear models with control inputs from snapshot data.

Two identification methods over one data model: classic DMD with
control (one SVD) and a residual-optimal variant that searches the
mode subspace itself by conjugate gradient on the Grassmann manifold.
Ships with a finite-volume wood-chip drying simulator for generating
realistic high-dimensional snapshot data, and a CLI wiring the whole
pipeline together.
"""

from . import dmdc, dryer, grassmann, linalg, objective, rom, store
from .dryer import DryerConfig, default_config
from .estimators import DMDc, OMDc
from .exceptions import OmdcError
from .grassmann import CgOptions, CgReport
from .objective import omdc_identify
from .rom import RomModel, compare, eigenvalues, load_model, save_model
from .store import (
    SnapshotSet,
    load_snapshots,
    normalize_fields,
    save_snapshots,
    split_snapshots,
)

__version__ = "0.1.0"

__all__ = [
    "CgOptions",
    "CgReport",
    "DMDc",
    "DryerConfig",
    "OMDc",
    "OmdcError",
    "RomModel",
    "SnapshotSet",
    "compare",
    "default_config",
    "dmdc",
    "dryer",
    "eigenvalues",
    "grassmann",
    "linalg",
    "load_model",
    "load_snapshots",
    "normalize_fields",
    "objective",
    "omdc_identify",
    "rom",
    "save_model",
    "save_snapshots",
    "split_snapshots",
    "store",
]
