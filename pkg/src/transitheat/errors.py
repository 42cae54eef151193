"""Exception hierarchy.

Everything a user can fix by correcting their inputs derives from
:class:`InputError`; the CLI maps those to exit code 1.
"""


class InputError(Exception):
    """Bad or inconsistent input data."""


class FeedError(InputError):
    """A GTFS table is missing or a row cannot be parsed."""

    def __init__(self, message, file=None, line=None, field=None):
        self.file = file
        self.line = line
        self.field = field
        where = []
        if file is not None:
            where.append(str(file))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{': '.join([', '.join(where), message])}"
        super().__init__(message)


class FeedValidationError(InputError):
    """Referential or ordering problems across GTFS tables."""

    def __init__(self, message, offenders=()):
        self.offenders = list(offenders)
        shown = "; ".join(self.offenders[:10])
        more = "" if len(self.offenders) <= 10 else f" (+{len(self.offenders) - 10} more)"
        super().__init__(f"{message}: {shown}{more}" if shown else message)


class EmptyNetworkError(InputError):
    pass


class WeatherError(InputError):
    pass


class WeatherLookupError(WeatherError):
    """A requested instant falls outside (or in a hole of) the archive."""


class DeltaError(InputError):
    pass


class CohortError(InputError):
    pass


class ConfigError(InputError):
    pass
