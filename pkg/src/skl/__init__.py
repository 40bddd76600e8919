"""Monte Carlo laboratory for stable-like jump processes killed outside a domain."""

from .errors import ConfigError, ContractError, DomainError, GeometryError, NumericError, SklError
from .geometry import DomainSpec
from .kernels import KappaModel, KernelSpec
from .simulator import SimConfig, Trajectory, run_ensemble, simulate_meyer_pair, simulate_path

__version__ = "0.1.0"
