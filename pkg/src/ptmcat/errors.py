"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for configuration
problems, 3 for bad input data, 4 for training failures.
"""

from __future__ import annotations


class PtmcatError(Exception):
    exit_code = 3


class ConfigError(PtmcatError):
    exit_code = 2


class DataError(PtmcatError):
    exit_code = 3


class HeaderMismatch(DataError):
    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"header is missing columns: {', '.join(self.missing)}")


class MalformedRow(DataError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"row {line}: {reason}")


class EmptyDataset(DataError):
    pass


class SchemaError(DataError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class EmptyName(DataError):
    pass


class TooFewSamples(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TrainingError(PtmcatError):
    exit_code = 4


class EmptyCorpus(TrainingError):
    pass


class SingleClassCorpus(TrainingError):
    pass


class DimensionMismatch(TrainingError):
    pass
