"""Wall-time attribution for uncertainty-propagation runs.

t_micro and t_macro are scoped around the respective step calls; everything
else (sampling, surrogate fit/predict, interpolation tests, moment and
bootstrap estimation, bookkeeping) lands in t_overhead = t_total - t_micro -
t_macro, so the three parts add up to the total exactly. When sample
evaluation ran on several threads the per-thread part sums are rescaled
proportionally onto the wall total.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["TimingBreakdown"]


@dataclass
class TimingBreakdown:
    total_s: float
    micro_s: float
    macro_s: float

    def __post_init__(self):
        if min(self.total_s, self.micro_s, self.macro_s) < 0:
            raise ValueError("negative timing")
        parts = self.micro_s + self.macro_s
        if parts > self.total_s * (1 + 1e-6):
            # threaded part sums exceed wall time; rescale proportionally
            scale = self.total_s / parts
            self.micro_s *= scale
            self.macro_s *= scale

    @property
    def overhead_s(self) -> float:
        return max(self.total_s - self.micro_s - self.macro_s, 0.0)

    @property
    def fractions(self) -> dict:
        if self.total_s <= 0:
            return {"micro": 0.0, "macro": 0.0, "overhead": 0.0}
        return {
            "micro": self.micro_s / self.total_s,
            "macro": self.macro_s / self.total_s,
            "overhead": self.overhead_s / self.total_s,
        }

    def to_dict(self) -> dict:
        f = self.fractions
        return {
            "total_s": self.total_s,
            "micro_s": self.micro_s,
            "macro_s": self.macro_s,
            "overhead_s": self.overhead_s,
            "micro_fraction": f["micro"],
            "macro_fraction": f["macro"],
            "overhead_fraction": f["overhead"],
        }
