"""Discontinuous Galerkin spectral element LES of compressible flow.

Two formulations are provided on one code path: a weak-form scheme on Gauss
nodes with the Vreman subgrid model (``eLES``) and a Kennedy-Gruber split
form on Gauss-Lobatto nodes without a model (``iLES``).
"""

from .basis import NodeKind, build_basis
from .bench import cfl_ramp, cost_report
from .config import RunConfig, load_config, parse_config
from .errors import (
    ComparisonError,
    ConfigurationError,
    DivergenceError,
    InsufficientDataError,
    MeshFormatError,
    MeshValidityError,
    RangeError,
    SamplingError,
    StateValidityError,
)
from .fileio import read_checkpoint, read_mesh, write_checkpoint, write_mesh
from .mesh import build_box_mesh, build_channel_mesh, build_deformed_box_mesh, compute_metrics
from .physics import GasModel, InterfaceScheme
from .solver import BoundaryCondition, Formulation, SchemeConfig, Solver
from .spectral import PsdConfig, Window, welch_psd
from .stats import StatisticsAccumulator, integrate_forces, q_criterion

__version__ = "0.1.0"
