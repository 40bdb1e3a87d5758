"""Error hierarchy shared by the library and the CLI"""

import json
from typing import Union


class RemNetError(Exception):
    """Base error; carries a machine-readable code and a CLI exit status"""
    def __init__(
        self,
        code: str,
        message: str,
        details: Union[dict, None] = None,
        exit_code: int = 1
    ):
        self.code = code
        self.message = message
        self.details = details or {}
        self.exit_code = exit_code
        super().__init__(self.message)

    def to_envelope(self) -> dict:
        return {
            "error": {
                "code": self.code,
                "message": self.message,
                "details": self.details,
                "exit_code": self.exit_code,
            }
        }

    def to_json_line(self) -> str:
        """Single-line JSON rendering for stderr"""
        return json.dumps(self.to_envelope(), default=str, separators=(",", ":"))


class ConfigError(RemNetError):
    """Invalid configuration value or file"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="CONFIG_ERROR", message=message, details=details, exit_code=2)


class SchemaError(RemNetError):
    """Input file does not follow its documented schema"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="SCHEMA_ERROR", message=message, details=details, exit_code=3)


class MissingFileError(RemNetError):
    """Required input file does not exist"""
    def __init__(self, path: str):
        super().__init__(
            code="MISSING_FILE",
            message=f"File not found: {path}",
            details={"path": str(path)},
            exit_code=4
        )


class ShapeError(RemNetError):
    """Tensor or image shape mismatch"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="SHAPE_ERROR", message=message, details=details, exit_code=5)


class ConstraintError(RemNetError):
    """A precondition of an operation is violated"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="CONSTRAINT_ERROR", message=message, details=details, exit_code=6)


class NonFiniteError(RemNetError):
    """NaN or Inf encountered where finite values are required"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="NON_FINITE", message=message, details=details, exit_code=7)


class TrainingDivergedError(RemNetError):
    """Training aborted because the loss became non-finite"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="TRAINING_DIVERGED", message=message, details=details, exit_code=8)


class DatasetWriteError(RemNetError):
    """Writing generated or augmented data failed"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="DATASET_WRITE_ERROR", message=message, details=details, exit_code=9)


class GradcheckFailure(RemNetError):
    """At least one op exceeded the gradient-check tolerance"""
    def __init__(self, message: str, details: dict = None):
        super().__init__(code="GRADCHECK_FAILED", message=message, details=details, exit_code=10)
