"""Cache-budget allocation across layers.

Budgets are split proportionally to layer preferences and rounded to
integers by floor plus largest remainder.  The arithmetic runs on exact
rationals so conservation, tie-breaking, and the strict stage-to-stage
budget decrease can be checked exactly rather than within a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence


@dataclass(frozen=True)
class BudgetVector:
    """Integer slot budgets, one per layer."""

    budgets: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.budgets:
            raise ValueError("budget vector must not be empty")
        if any(b < 0 for b in self.budgets):
            raise ValueError("budgets must be non-negative")

    @property
    def total(self) -> int:
        return sum(self.budgets)

    def __len__(self) -> int:
        return len(self.budgets)

    def __getitem__(self, i: int) -> int:
        return self.budgets[i]


@dataclass(frozen=True)
class BudgetSchedule:
    """Per-stage budget vectors; stage m covers layers 0..m.

    Once assigned, a layer's budget never grows at a later stage.
    """

    stages: tuple[BudgetVector, ...]

    def __post_init__(self) -> None:
        for m, vec in enumerate(self.stages):
            if len(vec) != m + 1:
                raise ValueError(f"stage {m} must cover exactly {m + 1} layers")
        for m in range(1, len(self.stages)):
            prev, cur = self.stages[m - 1], self.stages[m]
            for l in range(m):
                if cur[l] > prev[l]:
                    raise ValueError(f"stage {m} raises layer {l} budget {prev[l]} -> {cur[l]}")

    @property
    def final(self) -> BudgetVector:
        return self.stages[-1]


def _to_fractions(prefs: Sequence[float]) -> list[Fraction]:
    out = []
    for p in prefs:
        f = Fraction(p)
        if f < 0:
            raise ValueError("preferences must be non-negative")
        out.append(f)
    return out


def _hamilton(weights: Sequence[Fraction], total: int) -> list[int]:
    """Floor plus largest-remainder rounding; remainder ties go to the
    lower index.  Exact: weights are rationals."""
    denom = sum(weights)
    if denom <= 0:
        raise ValueError("at least one weight must be positive")
    raw = [w / denom * total for w in weights]
    base = [int(r) for r in raw]  # floor: raw values are non-negative
    leftover = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def uniform_allocate(num_layers: int, b_total: int) -> BudgetVector:
    """Equal split; the remainder goes to the earliest layers."""
    if num_layers < 1:
        raise ValueError("need at least one layer")
    if b_total < 0:
        raise ValueError("total budget must be non-negative")
    base, rem = divmod(b_total, num_layers)
    return BudgetVector(tuple(base + (1 if l < rem else 0) for l in range(num_layers)))


def allocate_final(
    prefs: Sequence[float],
    b_total: int,
    caps: Sequence[int] | None = None,
    min_budget: int = 0,
) -> BudgetVector:
    """Split `b_total` proportionally to `prefs`, clamped per layer.

    Every layer receives at least `min_budget` (layers with zero
    preference are pinned there) and at most its cap.  Units freed or
    demanded by clamping are redistributed among the unclamped layers by
    another largest-remainder pass.

    All-zero preferences degrade to a uniform split.
    """
    num = len(prefs)
    if num < 1:
        raise ValueError("preference vector must not be empty")
    fr = _to_fractions(prefs)
    cap_list = list(caps) if caps is not None else [b_total] * num
    if len(cap_list) != num:
        raise ValueError("caps must match the preference vector length")
    if min_budget < 0 or any(c < min_budget for c in cap_list):
        raise ValueError("caps must be at least the per-layer floor")
    if b_total < num * min_budget:
        raise ValueError(
            f"total budget {b_total} is below the floor {num} * {min_budget}"
        )
    if b_total > sum(cap_list):
        raise ValueError(f"total budget {b_total} exceeds the summed caps {sum(cap_list)}")

    if all(f == 0 for f in fr):
        out = list(uniform_allocate(num, b_total).budgets)
        if all(min_budget <= out[l] <= cap_list[l] for l in range(num)):
            return BudgetVector(tuple(out))
        fr = [Fraction(1)] * num  # uniform split violates a clamp; rerun clamped

    fixed: dict[int, int] = {l: min_budget for l in range(num) if fr[l] == 0}
    while True:
        free = [l for l in range(num) if l not in fixed]
        remaining = b_total - sum(fixed.values())
        if not free:
            break
        if remaining < 0:
            raise AssertionError("clamping overdrew the budget")
        alloc = _hamilton([fr[l] for l in free], remaining)
        violated = False
        for pos, l in enumerate(free):
            if alloc[pos] < min_budget:
                fixed[l] = min_budget
                violated = True
            elif alloc[pos] > cap_list[l]:
                fixed[l] = cap_list[l]
                violated = True
        if not violated:
            out = [0] * num
            for l, v in fixed.items():
                out[l] = v
            for pos, l in enumerate(free):
                out[l] = alloc[pos]
            return BudgetVector(tuple(out))

    # every layer clamped; push any leftover into remaining headroom
    out = [fixed[l] for l in range(num)]
    remaining = b_total - sum(out)
    order = sorted(range(num), key=lambda l: (-fr[l], l))
    while remaining > 0:
        moved = False
        for l in order:
            if remaining == 0:
                break
            if out[l] < cap_list[l]:
                out[l] += 1
                remaining -= 1
                moved = True
        if not moved:
            raise AssertionError("no headroom left while budget remains")
    return BudgetVector(tuple(out))


def allocate_stage(
    prefs_so_far: Sequence[float],
    b_total: int,
    prev: BudgetVector | None = None,
    caps: Sequence[int] | None = None,
    min_budget: int = 0,
) -> BudgetVector:
    """Stage allocation over the layers processed so far.

    The full budget is split over the prefix by `allocate_final`; then
    already-assigned layers are clamped to their previous budgets (a
    stage may shrink a layer, never grow it) and the freed units go to
    the newest layer, spilling into remaining headroom if its cap binds.
    """
    m = len(prefs_so_far) - 1
    if prev is None:
        if m != 0:
            raise ValueError("previous budgets are required beyond the first stage")
        return allocate_final(prefs_so_far, b_total, caps=caps, min_budget=min_budget)
    if len(prev) != m:
        raise ValueError(f"previous vector must cover {m} layers, got {len(prev)}")

    cap_list = list(caps) if caps is not None else [b_total] * (m + 1)
    base = allocate_final(prefs_so_far, b_total, caps=cap_list, min_budget=min_budget)
    out = list(base.budgets)
    freed = 0
    for l in range(m):
        if out[l] > prev[l]:
            freed += out[l] - prev[l]
            out[l] = prev[l]
    take = min(freed, cap_list[m] - out[m])
    out[m] += take
    freed -= take
    if freed > 0:
        # newest layer is capped; spill into other layers' headroom
        fr = _to_fractions(prefs_so_far)
        order = sorted(range(m), key=lambda l: (-fr[l], l))
        while freed > 0:
            moved = False
            for l in order:
                if freed == 0:
                    break
                if out[l] < min(prev[l], cap_list[l]):
                    out[l] += 1
                    freed -= 1
                    moved = True
            if not moved:
                break  # nothing can absorb the rest; undershoot the total
    return BudgetVector(tuple(out))


def stage_budgets_exact(prefs: Sequence[float], b_total: int) -> list[list[Fraction]]:
    """Real-valued (unrounded) stage budgets as exact rationals.

    Stage m assigns layer l <= m the fraction pref[l] / sum(prefs[:m+1])
    of the total.  Used by the strict-decrease verifier.
    """
    fr = _to_fractions(prefs)
    out: list[list[Fraction]] = []
    running = Fraction(0)
    for m, f in enumerate(fr):
        running += f
        if running == 0:
            out.append([Fraction(0)] * (m + 1))
        else:
            out.append([fr[l] / running * b_total for l in range(m + 1)])
    return out


def verify_prop1(prefs: Sequence[float], b_total: int) -> bool:
    """Exact check that real-valued stage budgets strictly decrease.

    For every stage transition that adds a layer with positive
    preference, each already-covered layer with positive preference must
    get a strictly smaller real-valued budget.  Zero-preference
    additions leave budgets exactly unchanged, which is allowed.
    """
    fr = _to_fractions(prefs)
    stages = stage_budgets_exact(prefs, b_total)
    for m in range(1, len(fr)):
        prev_stage, cur_stage = stages[m - 1], stages[m]
        for l in range(m):
            if fr[l] == 0:
                continue
            if fr[m] > 0:
                if not cur_stage[l] < prev_stage[l]:
                    return False
            else:
                if cur_stage[l] != prev_stage[l]:
                    return False
    return True
