"""Datasets: CSV ingestion, partitioning, resampling and synthetic generation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from pacl.errors import InvalidArgument, ParseError
from pacl.model import LogisticGrowthParams, logistic_predict

BY_RANGE = "by-range"
BOOTSTRAP_WITH = "bootstrap-with-replacement"
BOOTSTRAP_WITHOUT = "bootstrap-without-replacement"
PARTITION_MODES = (BY_RANGE, BOOTSTRAP_WITH, BOOTSTRAP_WITHOUT)

GAUSE_FIXTURE = "gause_synthetic.csv"
# generator settings of the shipped fixture
GAUSE_FIXTURE_NOISE_SD = 10.0
GAUSE_FIXTURE_SEED = 1934
GAUSE_TIMES = tuple(float(d) for d in range(24))


@dataclass(frozen=True)
class Dataset:
    """Ordered ``(x, y)`` observations with a provenance label."""

    x: np.ndarray
    y: np.ndarray
    label: str = ""

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape:
            raise InvalidArgument(f"x and y lengths differ ({x.size} vs {y.size})")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidArgument("dataset coordinates must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.x.shape[0]

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.x.tolist(), self.y.tolist()))

    def subset(self, idx, label: str) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.x[idx], self.y[idx], label)

    def relabel(self, label: str) -> "Dataset":
        return Dataset(self.x, self.y, label)


def concat(datasets: Sequence[Dataset], label: str = "pooled") -> Dataset:
    return Dataset(
        np.concatenate([d.x for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        label,
    )


def _is_header(row):
    return [c.strip().lower() for c in row] in (["t", "y"], ["x", "y"])


def load_csv(path, label: Optional[str] = None) -> Dataset:
    """Read a two-column ``t,y`` CSV file; a ``t,y`` header row is optional."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc

    xs, ys = [], []
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and _is_header(row):
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 columns, found {len(row)}", row=lineno)
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise ParseError(f"non-numeric cell in {row!r}", row=lineno) from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise ParseError(f"non-finite value in {row!r}", row=lineno)
        xs.append(x)
        ys.append(y)
    if not xs:
        raise ParseError(f"{path} contains no data rows")
    return Dataset(np.array(xs), np.array(ys), label or path.stem)


def save_csv(dataset: Dataset, path) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y"])
        for x, y in dataset.points:
            w.writerow([repr(x), repr(y)])


@dataclass(frozen=True)
class PartitionSpec:
    """How to split one source dataset into K agent sets plus a test set.

    ``assignments`` are 1-based inclusive ``(start, end)`` index ranges, one per
    recipient, used in ``by-range`` mode. ``sizes`` gives ``m_k`` per recipient
    for the bootstrap modes. The last recipient is always the principal.
    """

    mode: str
    assignments: Tuple[Tuple[int, int], ...] = field(default_factory=tuple)
    sizes: Tuple[int, ...] = field(default_factory=tuple)
    seed: int = 0

    @property
    def n_recipients(self) -> int:
        return len(self.assignments) if self.mode == BY_RANGE else len(self.sizes)

    def validate(self, source_size: int) -> None:
        if self.mode not in PARTITION_MODES:
            raise InvalidArgument(f"unknown partition mode {self.mode!r}")
        if self.n_recipients < 1:
            raise InvalidArgument("partition needs at least one recipient")
        if self.mode == BY_RANGE:
            taken = set()
            for start, end in self.assignments:
                if not 1 <= start <= end <= source_size:
                    raise InvalidArgument(
                        f"range ({start}, {end}) outside 1..{source_size}"
                    )
                span = set(range(start, end + 1))
                if taken & span:
                    raise InvalidArgument(f"range ({start}, {end}) overlaps another range")
                taken |= span
        else:
            if any(s < 1 for s in self.sizes):
                raise InvalidArgument("bootstrap sizes must be >= 1")
            if self.mode == BOOTSTRAP_WITHOUT and sum(self.sizes) > source_size:
                raise InvalidArgument(
                    f"sizes sum to {sum(self.sizes)} > source size {source_size}"
                )


def recipient_labels(n_recipients: int) -> List[str]:
    return [f"agent-{k}" for k in range(1, n_recipients)] + ["principal-test"]


def partition(source: Dataset, spec: PartitionSpec) -> List[Dataset]:
    """Split ``source`` into ``K`` training sets followed by the test set."""
    spec.validate(len(source))
    labels = recipient_labels(spec.n_recipients)
    if spec.mode == BY_RANGE:
        return [
            source.subset(np.arange(start - 1, end), lab)
            for (start, end), lab in zip(spec.assignments, labels)
        ]
    rng = np.random.default_rng(spec.seed)
    if spec.mode == BOOTSTRAP_WITH:
        return [
            source.subset(rng.integers(0, len(source), size=m), lab)
            for m, lab in zip(spec.sizes, labels)
        ]
    perm = rng.permutation(len(source))
    bounds = np.cumsum((0,) + tuple(spec.sizes))
    return [
        source.subset(perm[a:b], lab) for a, b, lab in zip(bounds[:-1], bounds[1:], labels)
    ]


def generate_logistic(
    params: LogisticGrowthParams, times, noise_sd: float = 0.0, seed=None
) -> Dataset:
    """Logistic curve sampled at ``times`` plus i.i.d. Gaussian noise."""
    times = np.asarray(times, dtype=float).reshape(-1)
    if times.size == 0:
        raise InvalidArgument("times must be nonempty")
    if not noise_sd >= 0:
        raise InvalidArgument("noise_sd must be >= 0")
    y = np.asarray(logistic_predict(params, times), dtype=float).reshape(-1)
    if noise_sd > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sd, size=y.size)
    return Dataset(times, y, "synthetic-logistic")


def fixture_path(name: str = GAUSE_FIXTURE) -> Path:
    return Path(str(resources.files("pacl") / "assets" / name))


def load_gause_fixture() -> Dataset:
    """The shipped 24-point synthetic stand-in for the digitized Gause data."""
    return load_csv(fixture_path(), label="gause-synthetic")


def logistic_initial_guess(dataset: Dataset, ceiling_factor: float = 1.05) -> np.ndarray:
    """Self-starting ``(N0, Ne, r)`` guess from data alone.

    Takes ``Ne`` slightly above the largest observation, then regresses
    ``log(Ne / y - 1)`` on ``t`` over the points with ``0 < y < Ne``; the slope
    gives ``-r`` and the intercept ``log((Ne - N0) / N0)``.
    """
    ne = ceiling_factor * float(np.max(dataset.y))
    if ne <= 0:
        raise InvalidArgument("logistic initial guess needs a positive observation")
    mask = (dataset.y > 0) & (dataset.y < ne)
    if np.count_nonzero(mask) < 2 or np.ptp(dataset.x[mask]) == 0:
        raise InvalidArgument("logistic initial guess needs two distinct usable times")
    z = np.log(ne / dataset.y[mask] - 1.0)
    slope, intercept = np.polyfit(dataset.x[mask], z, 1)
    r = max(-slope, 1e-3)
    n0 = ne / (1.0 + np.exp(intercept))
    return np.array([n0, ne, r])
