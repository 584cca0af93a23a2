"""Exception types shared across the package.

Each error carries an ``exit_code`` so the CLI can map failures onto its
0/1/2 contract without a lookup table: 1 for validation and configuration
problems, 2 for I/O and parse failures.
"""


class MultisemError(Exception):
    exit_code = 1


class ConfigError(MultisemError, ValueError):
    pass


class UnknownLabel(MultisemError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown label: {self.name!r}"


class DimensionMismatch(MultisemError, ValueError):
    pass


class BadK(MultisemError, ValueError):
    pass


class EmptyEvaluation(MultisemError, ValueError):
    pass


class MissingPrediction(MultisemError, KeyError):
    def __init__(self, sample_id):
        super().__init__(sample_id)
        self.sample_id = sample_id

    def __str__(self):
        return f"no prediction for sample {self.sample_id!r}"


class ParseError(MultisemError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}:"
        super().__init__(f"{where} {message}".strip() if where else message)
