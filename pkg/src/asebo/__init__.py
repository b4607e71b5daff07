"""ASEBO: blackbox optimization with adaptive active-subspace sampling."""
from .functions import BenchmarkFunction, counting_wrapper, initial_point, make_function
from .linalg import ActiveSubspace, DecayingCovariance, covariance_update, select_active_subspace
from .optimizer import (AdamConfig, AseboConfig, BanditExplorer, CompressedSensingExplorer, RunRecord,
                        asebo_optimize, vanilla_es)
from .theory import SubspaceSplit

__version__ = "0.1.0"
