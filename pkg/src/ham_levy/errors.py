"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class HamLevyError(Exception):
    code = "error"


class SchemaError(HamLevyError, ValueError):
    code = "schema_error"

    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = ".".join(str(p) for p in self.path)
        super().__init__(f"{where}: {message}" if where else message)


class ConflictError(HamLevyError, ValueError):
    code = "conflict_error"


class DivergentFirstMoment(HamLevyError, ValueError):
    code = "divergent_first_moment"


class InfiniteActivity(HamLevyError, ValueError):
    code = "infinite_activity"


class NonCenteredLaw(HamLevyError, ValueError):
    code = "non_centered_law"


class OutsideWindow(HamLevyError, ValueError):
    code = "outside_window"


class EmptyTargets(HamLevyError, ValueError):
    code = "empty_targets"


class TiedTimes(HamLevyError, ValueError):
    code = "tied_times"


class QuadratureNotConverged(HamLevyError, ArithmeticError):
    code = "quadrature_not_converged"


class DegenerateSample(HamLevyError, ValueError):
    code = "degenerate_sample"
