"""Exception types shared across the package."""


class HawkespoolError(Exception):
    """Base class for all package-specific errors."""


class NormUndefinedError(HawkespoolError):
    """Kernel has no finite integral (tabulated tail does not decay to zero)."""


class SolverDivergenceError(HawkespoolError):
    """Fixed-point iteration failed to converge at a collocation node."""

    def __init__(self, node_index, message=None):
        self.node_index = node_index
        super().__init__(message or f"fixed-point iteration diverged at node {node_index}")


class MeshTooCoarseError(HawkespoolError):
    """Implicit diagonal of the renewal system is not positive at this step size."""


class BoundInvalidError(HawkespoolError):
    """Thinning upper bound cannot be formed (non-monotone tabulated kernel)."""


class ExplosionError(HawkespoolError):
    """Cluster expansion exceeded the generation cap (runaway supercritical cascade)."""


class ConditioningImpossibleError(HawkespoolError):
    """Conditioning event has probability zero (no baseline mass before t)."""


class TruncationError(HawkespoolError):
    """Adaptive time truncation failed to reach the requested integrand tolerance."""


class ConfigError(HawkespoolError):
    """Experiment configuration fails schema validation."""
