"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the management
API copies into its error documents.
"""

from __future__ import annotations


class HolosliceError(Exception):
    code = "error"


class ConfigError(HolosliceError):
    """Malformed or inconsistent configuration document."""

    code = "config_error"


class NoPathError(HolosliceError):
    code = "no_path"


class InfeasibleError(HolosliceError):
    """A request cannot be satisfied with the remaining resources."""

    code = "infeasible"


class NoFeasiblePlacementError(InfeasibleError):
    code = "no_feasible_placement"


class DataplaneError(HolosliceError):
    code = "dataplane_error"


class DuplicateEntryError(DataplaneError):
    code = "duplicate_entry"


class UnknownExternError(DataplaneError):
    code = "unknown_extern"


class InsufficientCpuError(DataplaneError, InfeasibleError):
    code = "insufficient_cpu"


class InvalidTargetError(DataplaneError):
    code = "invalid_target"


class BackendUnavailableError(HolosliceError):
    code = "backend_unavailable"


class UnknownProgramError(HolosliceError):
    code = "unknown_program"


class UnknownSliceError(HolosliceError):
    code = "unknown_slice"


class ValidationError(HolosliceError):
    code = "invalid_request"


class MetricsError(HolosliceError, ValueError):
    code = "metrics_error"


class RouteMismatchError(HolosliceError):
    code = "route_mismatch"


class WorkloadMismatchError(HolosliceError):
    code = "workload_mismatch"
