from __future__ import annotations
from dataclasses import dataclass
from typing import List, Optional, Sequence

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class LbsimexError(Exception):
    """Root of every error raised by lbsimex; ``exit_code`` is what the CLI returns."""

    exit_code: int = 1


# ---------- validation / configuration (exit 2) ----------

class InvalidArgumentError(LbsimexError, ValueError):
    exit_code = EXIT_VALIDATION


class ConfigError(LbsimexError, ValueError):
    exit_code = EXIT_VALIDATION


class InvalidCovarianceError(LbsimexError, ValueError):
    exit_code = EXIT_VALIDATION


class DegenerateInputError(LbsimexError):
    exit_code = EXIT_VALIDATION


@dataclass(frozen=True)
class Violation:
    row: Optional[int]      # 0-based subject index; None for cohort-wide rules
    rule: str
    message: str

    def __str__(self) -> str:
        return self.message if self.row is None else f"{self.message}, row {self.row}"


class CohortValidationError(LbsimexError):
    exit_code = EXIT_VALIDATION

    def __init__(self, violations: Sequence[Violation], prefix: str = "invalid cohort"):
        self.violations: List[Violation] = list(violations)
        shown = "; ".join(str(v) for v in self.violations[:10])
        more = f" (+{len(self.violations) - 10} more)" if len(self.violations) > 10 else ""
        super().__init__(f"{prefix}: {shown}{more}")

    @property
    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]


# ---------- numerical (exit 3) ----------

class NumericalError(LbsimexError):
    exit_code = EXIT_NUMERICAL


class DegenerateWeightError(NumericalError):
    pass


class SingularRiskSetError(NumericalError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(f"no subject at risk with positive weight at event time {time:g}")


class BracketFailureError(NumericalError):
    pass


class UnstableContaminationError(NumericalError):
    def __init__(self, zeta: float, dropped: int, total: int):
        self.zeta = zeta
        self.dropped = dropped
        self.total = total
        super().__init__(
            f"{dropped}/{total} contaminated fits failed to converge at zeta={zeta:g}"
        )


class ScenarioInfeasibleError(NumericalError):
    pass


class CalibrationRangeError(NumericalError):
    pass


class ResampleError(NumericalError):
    pass


# ---------- I/O (exit 4) ----------

class DataIOError(LbsimexError, OSError):
    exit_code = EXIT_IO


class ReportIOError(LbsimexError, OSError):
    exit_code = EXIT_IO
