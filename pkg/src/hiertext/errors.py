"""Exception hierarchy shared by every hiertext module."""


class HiertextError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class UnknownLabel(HiertextError, ValueError):
    def __init__(self, raw, level):
        self.raw = raw
        self.level = level
        super().__init__(f"unknown label {raw!r} at level {level}")


class MalformedRow(HiertextError, ValueError):
    def __init__(self, line, reason="wrong column count"):
        self.line = line
        super().__init__(f"malformed row at line {line}: {reason}")


class MissingColumn(HiertextError, ValueError):
    pass


class DuplicateId(HiertextError, ValueError):
    def __init__(self, id_):
        self.id = id_
        super().__init__(f"duplicate id {id_!r}")


class InconsistentLabels(HiertextError, ValueError):
    pass


class EmptyDataset(HiertextError, ValueError):
    pass


class EmptyClass(HiertextError, ValueError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"class {label!r} has zero examples")


class TooFewExamples(HiertextError, ValueError):
    def __init__(self, label, count, needed):
        self.label = label
        super().__init__(f"class {label!r} has {count} examples, need at least {needed}")


class InvalidK(HiertextError, ValueError):
    pass


class EmptyCorpus(HiertextError, ValueError):
    pass


class DimensionMismatch(HiertextError, ValueError):
    pass


class CorruptModel(HiertextError):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(f"corrupt model file: {reason}")


class Misaligned(HiertextError, ValueError):
    pass


class WeightLengthMismatch(HiertextError, ValueError):
    pass


class InvalidStep(HiertextError, ValueError):
    pass


class LengthMismatch(HiertextError, ValueError):
    pass


class ConfigError(HiertextError):
    """Bad run configuration; the CLI maps this one to exit code 2."""
