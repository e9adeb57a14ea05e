"""Exception hierarchy shared by the library and the CLI."""


class SismonError(Exception):
    """Base class for all errors raised by sismon."""


class DataError(SismonError, ValueError):
    """Bad or inconsistent input data (pool files, label tables, plans)."""


class OracleIncompleteError(DataError):
    """An operation needing true labels was given a pool without them."""


class UncoveredIdError(DataError, KeyError):
    """A label was requested for an id the label source does not cover."""

    def __init__(self, ids):
        self.ids = list(ids)
        shown = ", ".join(str(i) for i in self.ids[:10])
        more = "" if len(self.ids) <= 10 else f" (+{len(self.ids) - 10} more)"
        super().__init__(f"no label available for id {shown}{more}")

    def __str__(self):
        return self.args[0]


class AllocationError(DataError):
    """The label budget cannot be split over the strata."""


class ConfigError(SismonError, ValueError):
    """Invalid simulation or design configuration."""


class SimulationError(SismonError):
    """A Monte-Carlo cell failed; carries the (design, budget, replication)."""

    def __init__(self, design, budget, replication, cause):
        self.design = design
        self.budget = budget
        self.replication = replication
        super().__init__(
            f"simulation failed in cell design={design} n={budget}"
            f" replication={replication}: {cause}"
        )
