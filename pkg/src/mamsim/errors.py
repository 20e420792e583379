class SimError(RuntimeError):
    """Base class for every error raised by the simulator."""


class InvalidArgumentError(SimError, ValueError):
    pass


class ProtocolError(SimError):
    """A rank broke epoch, collective or request discipline."""


class DeadlockError(SimError):
    """The event queue drained while ranks were still blocked."""

    def __init__(self, blocked: dict[tuple[int, str], str]):
        self.blocked = dict(blocked)
        parts = [f"rank {r}/{s} in {what}" for (r, s), what in sorted(self.blocked.items())]
        super().__init__("deadlock: " + "; ".join(parts))


class ConfigurationError(SimError):
    pass
