class FaceFlowError(Exception):
    kind = "error"
    exit_code = 1

    def __init__(self, message: str, details: list[str] | None = None) -> None:
        super().__init__(message)
        self.details = details or []

    def record(self) -> dict:
        return {"error": self.kind, "message": str(self), "details": self.details}


class ValidationError(FaceFlowError):
    kind = "validation"
    exit_code = 1


class ParameterShapeError(ValidationError):
    kind = "parameter_shape"


class DomainError(ValidationError):
    kind = "domain"


class RankError(ValidationError):
    kind = "rank"


class FormatError(ValidationError):
    kind = "format"

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class DatasetIOError(FaceFlowError):
    kind = "io"
    exit_code = 2


class PartialFailureError(FaceFlowError):
    kind = "partial"
    exit_code = 3


class InternalError(FaceFlowError):
    kind = "internal"
    exit_code = 1
