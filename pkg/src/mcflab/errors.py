"""Exception hierarchy for the flow laboratory.

Each class maps to one failure mode named in the module contracts; the CLI
maps them to distinct exit codes.
"""


class McflabError(Exception):
    """Base class for all laboratory errors."""


class ConfigError(McflabError):
    """A run configuration failed validation; message names the field."""


class DegenerateGeometry(McflabError):
    """A vertex star or simplex is numerically singular."""


class SingularityReached(McflabError):
    """Curvature bound exceeded the configured stop threshold."""

    def __init__(self, time, c_a0, msg=None):
        self.time = time
        self.c_a0 = c_a0
        super().__init__(msg or f"singularity proxy hit at t={time:.6g} (C_A0={c_a0:.6g})")


class NotFillable(McflabError):
    """Self-intersecting input without scenario sheet structure."""


class ChartInjectivityFailure(McflabError):
    """A canonical chart's simplices overlap in ambient space."""


class NumericalStall(McflabError):
    """A geodesic trace could not resolve a facet crossing after perturbation."""


class SelfIntersection(McflabError):
    """Two boundary vertices closer than the self-intersection tolerance."""


class RecollarNeeded(McflabError):
    """Collar update degenerated; caller must rebuild the domain from scratch."""


class ShellMissing(McflabError):
    """An outer-noncollapsing query was made without a comparison shell."""


class OffsetDegenerate(McflabError):
    """Outward offset self-intersects within the collar (delta too large)."""


class NotMeanConvexShell(McflabError):
    """Offset boundary has negative mean curvature; shrink delta."""


class BarrierViolated(McflabError):
    """A comparison shell vertex fails the barrier inequality."""

    def __init__(self, vertex, value):
        self.vertex = vertex
        self.value = value
        super().__init__(f"barrier inequality violated at shell vertex {vertex} (value {value:.6g})")


class EmbeddingLost(McflabError):
    """The pullback of the moving boundary crossed the shell wall."""


class NotMeanConvex(McflabError):
    """An operation requiring min H > 0 was called on a non-mean-convex state."""


class InsufficientWindow(McflabError):
    """Viscosity residuals need at least three consecutive snapshots."""


class CapGlueFailure(McflabError):
    """A surgery cross-section loop is not planar-fittable within tolerance."""


class GuardViolated(McflabError):
    """Surgery requested while the curvature-scale guard fails."""


class UnknownScenario(McflabError):
    """Scenario generator name not recognized."""
