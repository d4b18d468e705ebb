"""Exception types shared by every layer of the simulator."""


class CabaError(Exception):
    """Base class for all simulator errors."""


class MalformedHeader(CabaError):
    """A compressed line carries a header that does not describe a valid encoding."""


class DictIndexOutOfRange(MalformedHeader):
    """A C-Pack word code references a dictionary slot that was never written."""


class SizeOutOfRange(CabaError):
    pass


class ConfigError(CabaError):
    """Invalid configuration. ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SimFault(CabaError):
    """Illegal register or memory access by an executing warp."""


class AddressOutOfRange(CabaError):
    pass


class ParseError(CabaError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")
