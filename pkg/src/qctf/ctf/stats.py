from __future__ import annotations

from dataclasses import asdict, dataclass, field


@dataclass
class StageStats:
    """Stage sizes and abstract operation counts.

    Counted primitives: triplet fits (seeding), predicted chi2 evaluations
    (finding), pair comparisons or tree operations (cleaning) and track refits
    (selection).
    """

    k_seed: int = 0
    k_find: int = 0
    k_clean: int = 0
    k_select: int = 0
    seed_ops: int = 0
    find_ops: int = 0
    clean_ops: int = 0
    select_ops: int = 0

    @property
    def total_ops(self) -> int:
        return self.seed_ops + self.find_ops + self.clean_ops + self.select_ops

    def merge(self, other: "StageStats") -> "StageStats":
        return StageStats(**{k: v + getattr(other, k) for k, v in asdict(self).items()})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_ops"] = self.total_ops
        return d
