"""Exception hierarchy shared by every vrtiles module."""

from __future__ import annotations


class VRTilesError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateParameterError(VRTilesError, ValueError):
    pass


class MisalignmentError(VRTilesError, ValueError):
    pass


class DivisibilityError(VRTilesError, ValueError):
    pass


class LadderError(VRTilesError, ValueError):
    pass


class ManifestParseError(VRTilesError, ValueError):
    pass


class InfeasibleBudgetError(VRTilesError, ValueError):
    """Budget is below the sum of the lowest representation bitrates."""

    def __init__(self, budget, w_min, interval=None):
        self.budget = budget
        self.w_min = w_min
        self.interval = interval
        where = "" if interval is None else f"interval {interval}: "
        super().__init__(f"{where}budget {budget} is below W_min = {w_min}")


class ScalingOverflowError(VRTilesError, ValueError):
    pass


class TraceError(VRTilesError, ValueError):
    pass
