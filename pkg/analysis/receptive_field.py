"""Receptive-field analysis by brute-force impulse propagation.

Reachability is computed in 1-D: a 3x3 kernel is separable for this
purpose, so the 2-D influence set is the Cartesian product of the 1-D set
with itself. Every input position gets its own unit impulse (one batch
entry each), the impulses are pushed through all-ones kernels with the
engine's conv2d, and a position belongs to the influence set iff the
designated output neuron ends up non-zero.
"""
import csv
import io
import math
from dataclasses import dataclass
from functools import reduce
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import AnalysisError, ParameterError
from core.log import get_logger
from engine.ops import conv2d
from engine.tensor import ConvParams, Tensor

logger = get_logger("RF")

POOL = "pool"
CSV_HEADER = ["sequence", "rates", "extent", "dense", "adjacent_overlap"]
Step = Union[int, str]


@dataclass(frozen=True)
class RateSchedule:
    """3x3 stride-1 convolutions by atrous rate, optionally with 2x pooling steps."""

    steps: Tuple[Step, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        for step in steps:
            if step == POOL:
                continue
            if isinstance(step, bool) or not isinstance(step, (int, np.integer)) or step < 1:
                raise ParameterError(f"atrous rates must be positive integers, got {step!r}")
        object.__setattr__(self, "steps", tuple(s if s == POOL else int(s) for s in steps))

    @classmethod
    def of(cls, *steps: Step) -> "RateSchedule":
        return cls(tuple(steps))

    @classmethod
    def parse(cls, text: str) -> "RateSchedule":
        """"1,2,pool,3" -> RateSchedule((1, 2, 'pool', 3))."""
        steps = []
        for token in text.replace(" ", "").split(","):
            if token.lower() in ("p", POOL):
                steps.append(POOL)
            elif token.isdigit():
                steps.append(int(token))
            else:
                raise ParameterError(f"cannot parse schedule step '{token}'")
        return cls(tuple(steps))

    @property
    def rates(self) -> Tuple[int, ...]:
        return tuple(s for s in self.steps if s != POOL)

    @property
    def scale(self) -> int:
        """Input positions per output position."""
        return 2 ** sum(1 for s in self.steps if s == POOL)

    @property
    def radius(self) -> int:
        """Input-space reach of the convolutions on either side of a pooling window."""
        total, jump = 0, 1
        for step in self.steps:
            if step == POOL:
                jump *= 2
            else:
                total += step * jump
        return total

    def __str__(self):
        return "-".join(str(s) for s in self.steps)


def input_extent(schedule: RateSchedule) -> int:
    """Receptive-field size by the kernel/stride recurrence: rf += (k_eff - 1) * jump."""
    rf, jump = 1, 1
    for step in schedule.steps:
        if step == POOL:
            rf += jump
            jump *= 2
        else:
            rf += 2 * step * jump
    return rf


@dataclass(frozen=True)
class InfluenceSet:
    """Input positions whose perturbation changes output neuron `output_index`."""

    positions: FrozenSet[int]
    output_index: int
    scale: int
    domain: int

    @property
    def anchor(self) -> int:
        """First input position covered by the output neuron's pooling window."""
        return self.output_index * self.scale

    @property
    def offsets(self) -> Tuple[int, ...]:
        return tuple(sorted(p - self.anchor for p in self.positions))

    @property
    def interval(self) -> Tuple[int, int]:
        return min(self.positions), max(self.positions)

    @property
    def extent(self) -> int:
        lo, hi = self.interval
        return hi - lo + 1

    @property
    def dense(self) -> bool:
        """No position strictly inside the interval is missing."""
        return len(self.positions) == self.extent


def suggested_domain(schedule: RateSchedule) -> int:
    """Smallest domain in which two adjacent central neurons are unclipped."""
    scale = schedule.scale
    margin = math.ceil(schedule.radius / scale)
    return scale * (2 * margin + 2)


def _check_domain(schedule: RateSchedule, domain: int, output_index: int) -> None:
    scale = schedule.scale
    needed = suggested_domain(schedule)
    if domain % scale:
        raise AnalysisError(f"domain {domain} is not divisible by the pooling scale {scale}",
                            suggested_size=needed)
    lo = output_index * scale - schedule.radius
    hi = output_index * scale + scale - 1 + schedule.radius
    if lo < 0 or hi > domain - 1:
        raise AnalysisError(f"influence of output {output_index} spans [{lo}, {hi}], "
                            f"outside the domain [0, {domain - 1}]", suggested_size=needed)


def _propagate(schedule: RateSchedule, domain: int) -> np.ndarray:
    """(domain, domain // scale) reach matrix: row p is the response to an impulse at p."""
    x = Tensor(np.eye(domain, dtype=np.float64).reshape(domain, 1, 1, domain))
    for step in schedule.steps:
        if step == POOL:
            data = x.data
            x = Tensor(data[..., 0::2] + data[..., 1::2])
        else:
            kernel = Tensor(np.ones((1, 1, 1, 3)))
            x = conv2d(x, ConvParams(kernel, dilation_rate=step))
    return x.data[:, 0, 0, :]


def _default_index(schedule: RateSchedule, domain: int) -> int:
    return (domain // schedule.scale - 1) // 2


def influence_set(schedule: RateSchedule, output_index: Optional[int] = None,
                  domain: Optional[int] = None) -> InfluenceSet:
    if domain is None:
        domain = suggested_domain(schedule)
    if output_index is None:
        output_index = _default_index(schedule, domain)
    _check_domain(schedule, domain, output_index)
    reach = _propagate(schedule, domain)
    positions = frozenset(int(p) for p in np.flatnonzero(reach[:, output_index]))
    return InfluenceSet(positions, output_index, schedule.scale, domain)


def has_gridding(schedule: RateSchedule) -> bool:
    """True iff a central neuron's influence set has interior holes."""
    return not influence_set(schedule).dense


def _adjacent(schedule: RateSchedule) -> Tuple[InfluenceSet, InfluenceSet]:
    domain = suggested_domain(schedule)
    reach = _propagate(schedule, domain)
    index = _default_index(schedule, domain)
    _check_domain(schedule, domain, index)
    _check_domain(schedule, domain, index + 1)
    sets = []
    for j in (index, index + 1):
        positions = frozenset(int(p) for p in np.flatnonzero(reach[:, j]))
        sets.append(InfluenceSet(positions, j, schedule.scale, domain))
    return sets[0], sets[1]


def adjacent_overlap(schedule: RateSchedule) -> int:
    """Input positions reached by both of two neighbouring output neurons."""
    left, right = _adjacent(schedule)
    return len(left.positions & right.positions)


def interval_overlap(schedule: RateSchedule) -> int:
    """Overlap of the two neighbours' bounding intervals, holes ignored."""
    left, right = _adjacent(schedule)
    lo = max(left.interval[0], right.interval[0])
    hi = min(left.interval[1], right.interval[1])
    return max(hi - lo + 1, 0)


def rates_gcd(rates: Sequence[int]) -> int:
    return reduce(math.gcd, rates, 0)


# -- architecture reports -----------------------------------------------------

@dataclass(frozen=True)
class SequenceReport:
    sequence: int
    rates: Tuple[int, ...]
    extent: int
    dense: bool
    adjacent_overlap: int
    interval_overlap: int
    input_extent: int

    def cells(self) -> List:
        return [self.sequence, "-".join(str(r) for r in self.rates), self.extent,
                str(self.dense).lower(), self.adjacent_overlap]


def rf_report(arch) -> List[SequenceReport]:
    """One row per encoder sequence.

    `extent`, `dense` and the overlaps describe the sequence on its own
    feature map; `input_extent` is the cumulative receptive field in input
    pixels, through every earlier sequence and pooling step.
    """
    rows = []
    cumulative: List[Step] = []
    for k, rates in enumerate(arch.encoder_rate_schedule):
        if k:
            cumulative.append(POOL)
        cumulative.extend(rates)
        local = RateSchedule(tuple(rates))
        found = influence_set(local)
        rows.append(SequenceReport(
            sequence=k + 1,
            rates=tuple(rates),
            extent=found.extent,
            dense=found.dense,
            adjacent_overlap=adjacent_overlap(local),
            interval_overlap=interval_overlap(local),
            input_extent=input_extent(RateSchedule(tuple(cumulative))),
        ))
    logger.debug(f"{arch.variant}: {sum(r.dense for r in rows)}/{len(rows)} sequences dense")
    return rows


def to_csv(rows: List[SequenceReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells())
    return buffer.getvalue()


def to_text(rows: List[SequenceReport], variant: str = "") -> str:
    head = f"{'seq':>3}  {'rates':<12}{'extent':>7}{'dense':>7}{'overlap':>9}{'interval':>10}{'input rf':>10}"
    lines = [f"Receptive fields{' of ' + variant if variant else ''} (1-D; the 2-D set is the square of it)",
             head, "-" * len(head)]
    for r in rows:
        rates = ",".join(str(v) for v in r.rates)
        lines.append(f"{r.sequence:>3}  {rates:<12}{r.extent:>7}{str(r.dense).lower():>7}"
                     f"{r.adjacent_overlap:>9}{r.interval_overlap:>10}{r.input_extent:>10}")
    lines.append("Rate order does not change reachability, so a cascade listed top-down "
                 "as 3,2,1 is the same as 1,2,3 bottom-up.")
    return "\n".join(lines)
