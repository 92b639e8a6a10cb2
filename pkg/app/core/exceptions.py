class RgError(Exception):
    """Base class for every engine error. `exit_code` is the batch-mode exit status."""

    exit_code = 1


# -----------------------
# USER ERRORS (exit 1)
# -----------------------


class UserError(RgError):
    exit_code = 1


class ParseError(UserError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class BindError(UserError):
    pass


class SchemaError(UserError):
    pass


class ConversionError(UserError):
    pass


class NotFound(UserError):
    pass


class DeltaError(UserError):
    pass


class ConfigError(UserError):
    pass


class ExecError(UserError):
    pass


# -----------------------
# INTERNAL ERRORS (exit 2)
# -----------------------


class InternalError(RgError):
    exit_code = 2


class DanglingRef(InternalError):
    pass


class UnregisteredFragment(InternalError):
    pass


class BuildError(InternalError):
    pass


class PlanError(InternalError):
    pass
