"""Exception hierarchy shared across the simulator."""


class SimulationError(Exception):
    """Base class for all marsris errors."""


class GridExtentError(SimulationError):
    """A landform or grid does not fit the requested extent."""


class OutOfBoundsError(SimulationError):
    """A query point lies outside the heightfield extent."""


class InvalidPositionError(SimulationError):
    """A position is non-finite or below the terrain surface."""


class GridParseError(SimulationError):
    """An elevation grid file is malformed."""


class GeometryError(SimulationError):
    """A panel/terminal arrangement is geometrically infeasible."""


class UnsupportedFrequencyError(SimulationError):
    """Frequency outside the validity domain of the channel model."""


class DelegatedInteractionError(SimulationError):
    """A path contains an interaction this routine does not handle."""


class NoCoverageError(SimulationError):
    """No finite signal available where one is required."""


class ConfigError(SimulationError):
    """Scenario configuration is invalid or infeasible."""
