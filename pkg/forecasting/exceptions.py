"""Exception hierarchy for the forecasting toolkit."""


class ForecastingError(Exception):
    """Base class for every error raised by the toolkit."""


class DataError(ForecastingError, ValueError):
    """Raised when input data cannot be parsed or violates a series invariant."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        location = ''
        if path is not None:
            location = f'{path}'
            if line is not None:
                location += f':{line}'
            location += ': '
        elif line is not None:
            location = f'line {line}: '
        super().__init__(f'{location}{message}')


class DuplicateTimestampError(DataError):
    pass


class GapError(DataError):
    """Raised when calendar months are missing from a series."""

    def __init__(self, message, missing_months, path=None):
        self.missing_months = list(missing_months)
        months = ', '.join(str(month) for month in self.missing_months)
        super().__init__(f'{message}: {months}', path=path)


class DiagnosticError(ForecastingError, ValueError):
    pass


class ModelError(ForecastingError, ValueError):
    pass


class KernelError(ModelError):
    pass


class MetricError(ForecastingError, ValueError):
    pass


class SmoothingError(ForecastingError, ValueError):
    pass


class GenomeError(ForecastingError, ValueError):
    pass


class ConfigurationError(ForecastingError, ValueError):
    pass
