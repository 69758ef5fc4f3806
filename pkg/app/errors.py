"""
Exception hierarchy shared by every package.

Each error carries a stable machine-readable ``code`` and a human ``message``;
the CLI turns the class-level ``exit_code`` into the process exit status.
"""


class CwmError(Exception):
    """Base exception for the causal world model pipeline"""

    exit_code = 4
    default_code = "cwm_error"

    def __init__(self, message: str, code: str = None):
        self.code = code or self.default_code
        self.message = message
        super().__init__(f"{self.code}: {message}")

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.message, "exit_code": self.exit_code}


class ConfigError(CwmError):
    exit_code = 2
    default_code = "config_error"


class DataError(CwmError):
    exit_code = 3
    default_code = "data_error"


class UnknownEntity(DataError):
    default_code = "unknown_entity"

    def __init__(self, kind: str, entity_id: int):
        self.kind = kind
        self.entity_id = entity_id
        super().__init__(f"no {kind} with id {entity_id}")


class InfeasibleConfig(DataError):
    default_code = "infeasible_config"


class WindowTooLong(DataError):
    default_code = "window_too_long"


class EmptyDataset(DataError):
    default_code = "empty_dataset"


class DegenerateData(DataError):
    default_code = "degenerate_data"


class EmptyMask(DataError):
    default_code = "empty_mask"

    def __init__(self, variable: int):
        self.variable = variable
        super().__init__(f"causal variable {variable} has no relevant latent")


class DimensionError(DataError):
    default_code = "dimension_error"


class NumericalError(CwmError):
    exit_code = 4
    default_code = "numerical_error"


class NotExpanded(CwmError):
    exit_code = 4
    default_code = "not_expanded"


class ScorerError(CwmError):
    exit_code = 4
    default_code = "scorer_error"
