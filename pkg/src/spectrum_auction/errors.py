"""Exception types raised by the simulator."""


class SpectrumAuctionError(Exception):
    pass


class InvalidGeometryError(SpectrumAuctionError, ValueError):
    pass


class InvalidPopulationError(SpectrumAuctionError, ValueError):
    pass


class UndefinedFairnessError(SpectrumAuctionError, ValueError):
    pass


class NormalizationError(SpectrumAuctionError, ArithmeticError):
    """Raised when a regret-matching update leaves negative mass on the current channel."""


class ConfigError(SpectrumAuctionError, ValueError):
    """Invalid scenario configuration.

    ``line`` is the 1-based line of the offending entry when the error came
    from a config document, otherwise ``None``. ``field`` names the config
    field at fault, when known.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        self.message = message
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class OutputError(SpectrumAuctionError, OSError):
    """An output file could not be written; ``path`` names it."""

    def __init__(self, path, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")
