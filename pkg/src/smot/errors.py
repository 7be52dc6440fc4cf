"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` used by the CLI when it
serialises failures as ``{"error": kind, "detail": ...}``.
"""


class SmotError(Exception):
    kind = "error"

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail

    def to_json(self):
        out = {"error": self.kind, "detail": str(self)}
        if self.detail:
            out["context"] = self.detail
        return out


class DomainError(SmotError, ValueError):
    kind = "domain"


class MassError(SmotError, ValueError):
    kind = "mass"


class InvalidPotentialError(SmotError, ValueError):
    kind = "invalid_potential"


class OrderError(SmotError):
    """An order relation (<=_cd or <=_c) required by an operation fails.

    ``breakpoint`` is a location where the put potential of the left operand
    exceeds that of the right one, when such a point exists.
    """

    kind = "order_violation"

    def __init__(self, message, breakpoint=None, gap=None, **detail):
        super().__init__(message, **detail)
        self.breakpoint = breakpoint
        self.gap = gap
        if breakpoint is not None:
            self.detail["breakpoint"] = breakpoint
        if gap is not None:
            self.detail["gap"] = gap


class ChainingError(SmotError):
    kind = "chaining"


class SolverError(SmotError, RuntimeError):
    kind = "solver"


class DecompositionError(SmotError):
    kind = "decomposition"


class CouplingInconsistentError(SmotError):
    kind = "coupling_inconsistent"


class ParameterSearchError(SmotError):
    kind = "parameter_search"


class PreconditionError(SmotError, ValueError):
    kind = "precondition"


class TargetConstructionError(SmotError):
    kind = "target_construction"


class LocalizationError(SmotError):
    kind = "degenerate_localization"


class CorrectionError(SmotError):
    kind = "correction"


class CompletionError(SmotError):
    kind = "completion"


class StageBoundError(SmotError, AssertionError):
    """A quantitative bound that must hold at a pipeline stage was violated."""

    kind = "stage_bound"


class PipelineError(SmotError):
    kind = "pipeline"

    def __init__(self, message, stage=None, **detail):
        super().__init__(message, **detail)
        self.stage = stage
        if stage is not None:
            self.detail["stage"] = stage


class CostDomainError(SmotError, ValueError):
    kind = "cost_domain"


class RegionCoverageError(SmotError):
    kind = "region_coverage"


class PerturbationError(SmotError):
    kind = "perturbation"
