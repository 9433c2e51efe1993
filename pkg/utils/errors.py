"""
RSLab Errors
Exception hierarchy shared by every module; the CLI maps them to exit codes
"""


class RSLabError(Exception):
    """Base error for the lab"""

    exit_code = 2


class ConfigError(RSLabError):
    """Invalid configuration or flag combination"""

    exit_code = 2


class InputError(RSLabError):
    """Invalid input value (unknown glyph, token id out of range, ...)"""

    exit_code = 2


class DimensionError(RSLabError):
    """Operand shapes do not line up"""

    exit_code = 2


class ContractError(RSLabError):
    """API used outside its contract"""

    exit_code = 2


class StepOverflowError(RSLabError):
    """Decoding step beyond the position embedding table"""

    exit_code = 2


class DataIOError(RSLabError):
    """Reading or writing an artifact failed"""

    exit_code = 3


class InsufficientDataError(RSLabError):
    """Not enough samples to compute the requested statistic"""

    exit_code = 4


class UndefinedR2Error(InsufficientDataError):
    """R² undefined because all targets are equal"""


class NumericError(RSLabError):
    """Non-finite value encountered"""

    exit_code = 5
