"""Exception hierarchy shared by all modules.

Every exception carries a stable ``code`` used by the CLI's JSON error objects.
"""


class InvCorrError(Exception):
    code = "INVCORR_ERROR"


class DimensionError(InvCorrError, ValueError):
    code = "DIMENSION_ERROR"


class ValidationError(InvCorrError, ValueError):
    """Input object violates one or more invariants.

    ``violations`` lists every violated invariant, not just the first.
    """

    code = "VALIDATION_ERROR"

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class AdmissibilityError(InvCorrError, ValueError):
    code = "ADMISSIBILITY_ERROR"


class StructureError(InvCorrError, ValueError):
    code = "STRUCTURE_ERROR"


class ConstructionError(InvCorrError, ValueError):
    code = "CONSTRUCTION_ERROR"


class CapacityError(InvCorrError, RuntimeError):
    code = "CAPACITY_ERROR"


class WeightSumError(InvCorrError, ValueError):
    code = "WEIGHT_SUM_ERROR"
