from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    null_hypothesis: str
    reject_at_05: bool = field(init=False)

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        p = min(max(float(self.p_value), 0.0), 1.0)
        object.__setattr__(self, "p_value", p)
        object.__setattr__(self, "statistic", float(self.statistic))
        object.__setattr__(self, "reject_at_05", p < 0.05)

    @property
    def conclusion(self) -> str:
        return "reject" if self.reject_at_05 else "fail to reject"

    def to_dict(self) -> dict:
        return {
            "null_hypothesis": self.null_hypothesis,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "conclusion": self.conclusion,
        }
