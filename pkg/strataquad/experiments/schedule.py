"""N-schedules: one exact MSE evaluation per target N."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from strataquad.design.densities import Density
from strataquad.design.grids import (
    Allocation,
    CrossRegularDesign,
    allocate_optimal,
    allocate_uniform,
    build_design,
)
from strataquad.errors import InvalidArgumentError
from strataquad.fields import FieldModel
from strataquad.logging import get_logger
from strataquad.models import MseReport, ScheduleRow
from strataquad.quadrature.mse import exact_mse, projected_cost

logger = get_logger(__name__)

ALLOCATION_RULES = ("uniform", "optimal", "explicit")


@dataclass(frozen=True)
class Schedule:
    """A model, a design family and an increasing list of target N.

    Attributes:
        model: Field model.
        densities: One density per component.
        N_targets: Strictly increasing targets, at least four.
        allocation: 'uniform', 'optimal' (needs ``v``) or 'explicit' (needs ``counts``).
        v: Component constants for the optimal allocation.
        counts: Per-target component counts for the explicit allocation.
        order: Cubature order; model default when None.
    """

    model: FieldModel
    densities: Tuple[Density, ...]
    N_targets: Tuple[int, ...]
    allocation: str = "uniform"
    v: Optional[Tuple[float, ...]] = None
    counts: Optional[Tuple[Tuple[int, ...], ...]] = None
    order: Optional[int] = None

    def __post_init__(self) -> None:
        targets = self.N_targets
        if len(targets) < 4:
            raise InvalidArgumentError(f"a schedule needs at least 4 targets, got {len(targets)}")
        if any(b <= a for a, b in zip(targets, targets[1:])):
            raise InvalidArgumentError(f"N targets must be strictly increasing, got {targets}")
        if self.allocation not in ALLOCATION_RULES:
            raise InvalidArgumentError(f"unknown allocation rule '{self.allocation}'")
        if self.allocation == "optimal" and self.v is None:
            raise InvalidArgumentError("optimal allocation needs component constants v")
        if self.allocation == "explicit" and (self.counts is None or len(self.counts) != len(targets)):
            raise InvalidArgumentError("explicit allocation needs one count vector per target")

    def allocation_for(self, position: int) -> Allocation:
        dec = self.model.decomposition
        N = self.N_targets[position]
        if self.allocation == "uniform":
            return allocate_uniform(N, dec)
        if self.allocation == "optimal":
            return allocate_optimal(self.v, self.model.smoothness, dec, N)
        return Allocation.from_counts(self.counts[position], dec)

    def design_for(self, position: int) -> CrossRegularDesign:
        return build_design(self.model.decomposition, self.densities, self.allocation_for(position))


@dataclass
class ScheduleTable:
    """Rows of a finished schedule with their full reports."""

    rows: List[ScheduleRow]
    reports: List[MseReport]

    @property
    def N(self) -> np.ndarray:
        return np.array([row.N_actual for row in self.rows], dtype=float)

    @property
    def e2(self) -> np.ndarray:
        return np.array([row.e2 for row in self.rows])


def projected_schedule_cost(schedule: Schedule) -> List[int]:
    """Projected kernel evaluations of every entry."""
    return [
        projected_cost(schedule.model, schedule.design_for(i), schedule.order)
        for i in range(len(schedule.N_targets))
    ]


def run_schedule(
    schedule: Schedule,
    threads: Optional[int] = None,
    budget: Optional[float] = None,
    timing: bool = False,
    per_stratum: bool = False,
    concurrent_entries: bool = False,
) -> ScheduleTable:
    """Run exact_mse for every target.

    Entries run in order, each parallel internally. With ``concurrent_entries``
    the entries themselves run in a thread pool, single-threaded each.

    Raises:
        BudgetExceededError: As exact_mse, for the first entry over budget.
    """

    def run_entry(position: int) -> Tuple[ScheduleRow, MseReport]:
        design = schedule.design_for(position)
        started = time.perf_counter()
        report = exact_mse(
            schedule.model,
            design,
            schedule.order,
            per_stratum=per_stratum,
            threads=1 if concurrent_entries else threads,
            budget=budget,
        )
        elapsed = time.perf_counter() - started
        row = ScheduleRow(
            N_target=schedule.N_targets[position],
            N_actual=report.N_actual,
            e2=report.e2,
            err_est=report.error_estimate,
            order=report.cubature_order,
            seconds=elapsed if timing else None,
        )
        logger.info("schedule_entry_done", N_target=row.N_target, N_actual=row.N_actual, e2=row.e2)
        return row, report

    positions = range(len(schedule.N_targets))
    if concurrent_entries:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_entry, positions))
    else:
        results = [run_entry(i) for i in positions]
    return ScheduleTable(rows=[r for r, _ in results], reports=[m for _, m in results])


def schedule_from(
    model: FieldModel,
    densities: Sequence[Density],
    N_targets: Sequence[int],
    **kwargs,
) -> Schedule:
    """Convenience constructor that normalizes sequences to tuples."""
    counts = kwargs.pop("counts", None)
    v = kwargs.pop("v", None)
    return Schedule(
        model=model,
        densities=tuple(densities),
        N_targets=tuple(int(n) for n in N_targets),
        v=None if v is None else tuple(float(x) for x in v),
        counts=None if counts is None else tuple(tuple(int(x) for x in c) for c in counts),
        **kwargs,
    )
