"""Storage-tier placement modeling and performance-region mining for I/O-centric workflows."""

from .configspace import Assignment, CritEntry, EvaluatedConfig, enumerate_assignments, evaluate, evaluate_all, straggler
from .kernels import BACKEND
from .regions import (
    CartParams,
    RegionModel,
    SeparationParams,
    adaptive_threshold,
    ccp_path,
    cross_fit_select,
    encode,
    epsilon_check,
    finalize,
    fit_cart,
    hedges_g,
    separation,
)
from .storage import ComponentTimes, ProfileRecord, StorageProfile, component_times, estimate_rate
from .workflow import WorkflowTemplate, builtin_template, project, validate

__version__ = "0.1.0"
