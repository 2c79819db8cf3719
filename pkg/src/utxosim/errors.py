"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for all domain errors raised by the simulator."""


class UnknownAccountError(SimulationError):
    """An operation referenced an account id the ledger does not know.

    Usually indicates an execution plan / ledger mismatch.
    """


class InsufficientFundsError(SimulationError):
    """Inputs cannot cover the dust floor plus fees for a transaction."""


class DustViolationError(SimulationError):
    """A value split produced an output below the dust floor."""


class PoolExhaustedError(SimulationError):
    """A single-use pool ran out of fresh send or receive capacity."""


class ScheduleOrderError(SimulationError):
    """A requested timestamp window is empty (lower bound above upper).

    Happens when a schema row's preferred timestamp precedes the last
    activity of the participating accounts.
    """


class SchemaError(SimulationError):
    """A schema file could not be parsed or failed validation."""


class CompileError(SimulationError):
    """A schema row could not be mapped onto a generator."""


class ConfigError(SimulationError):
    """Invalid configuration (label maps, policies, CLI arguments)."""
