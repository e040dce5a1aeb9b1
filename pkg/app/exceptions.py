"""
Error hierarchy for morphdiv
Services raise these; controllers map them to process exit codes
"""

from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class MorphDivError(Exception):
    """Base class for every error raised by morphdiv services"""

    exit_code = EXIT_DATA


class UsageError(MorphDivError):
    """Bad flags, bad configuration values or missing input files"""

    exit_code = EXIT_USAGE


class DataFormatError(MorphDivError, ValueError):
    """Malformed input data, reported with the sentence and line it came from"""

    def __init__(self, message: str, sentence: Optional[str] = None, line: Optional[int] = None):
        self.message = message
        self.sentence = sentence
        self.line = line
        super().__init__(self._render())

    def _render(self) -> str:
        context = []
        if self.sentence is not None:
            context.append(f"sentence {self.sentence}")
        if self.line is not None:
            context.append(f"line {self.line}")
        if not context:
            return self.message
        return f"{self.message} ({', '.join(context)})"


class TreeStructureError(DataFormatError):
    """A dependency tree violates the single-root acyclic tree shape"""


class AlignmentFormatError(DataFormatError):
    """A Pharaoh alignment line is malformed or out of range"""


class PatternTypeError(MorphDivError, TypeError):
    """Word-based and arc-based patterns were mixed"""


class StatisticsError(MorphDivError, ValueError):
    """A metric is undefined for its input (empty denominator, zero variance, ...)"""


class GroupRejected(MorphDivError):
    """A control/experiment group pair did not reach the minimum size"""

    def __init__(self, source_pattern: str, target_pattern: str,
                 control_size: int, experiment_size: int, min_size: int):
        self.source_pattern = source_pattern
        self.target_pattern = target_pattern
        self.control_size = control_size
        self.experiment_size = experiment_size
        self.min_size = min_size
        super().__init__(
            f"Groups for {source_pattern} -> {target_pattern} rejected: "
            f"control={control_size}, experiment={experiment_size}, minimum={min_size}"
        )

    @property
    def reason(self) -> str:
        short = []
        if self.control_size < self.min_size:
            short.append(f"control {self.control_size} < {self.min_size}")
        if self.experiment_size < self.min_size:
            short.append(f"experiment {self.experiment_size} < {self.min_size}")
        return "; ".join(short)
