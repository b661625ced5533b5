
class VGM2PError(Exception):
    """Base error for every failure raised by the project."""

    default_code = "error"

    def __init__(self, detail: str | dict, code: str | None = None):
        self.detail = detail
        self.code = code or self.default_code
        super().__init__(detail)

    def as_dict(self) -> dict:
        return {"success": False, "code": self.code, "errors": self.detail}


class DimensionError(VGM2PError):
    """Raised when tensor shapes do not chain (names the offending layer)."""

    default_code = "dimension"


class NumericError(VGM2PError):
    """Raised when a value that must be finite is not."""

    default_code = "numeric"

    def __init__(self, detail: str | dict, value: float | None = None, code: str | None = None):
        self.value = value
        super().__init__(detail, code)


class ArgumentError(VGM2PError):
    default_code = "argument"


class DegenerateConditionError(VGM2PError):
    """A condition posterior row has zero mass, so Bayes conditioning is undefined."""

    default_code = "degenerate_condition"


class EnumerationSizeError(VGM2PError):
    default_code = "enumeration_size"


class DatasetError(VGM2PError):
    default_code = "dataset"


class TrainingDivergedError(NumericError):
    """
    Non-finite loss during training.

    ``snapshot`` holds the step index, the last finite losses and the
    offending value so a run can be inspected after it aborts.
    """

    default_code = "training_diverged"

    def __init__(self, detail: str, value: float | None = None, snapshot: dict | None = None):
        self.snapshot = snapshot or {}
        super().__init__(detail, value=value)
