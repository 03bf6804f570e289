"""Datasets: synthetic generation from ground-truth polynomials, target
noise, irrelevant-input augmentation, CSV round-tripping and splits.

All inputs are strictly positive (the network trains on log-features).
Randomness is split into independent streams per concern: for a generation
seed s, inputs draw from [s, 0], target noise from [s, 1] and irrelevant
columns from [s, 2], so toggling one knob never reshuffles the others.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .poly import LaurentPolynomial, evaluate_many, format_number, print_equation

__all__ = [
    "Dataset",
    "Provenance",
    "SamplingSpec",
    "DEFAULT_RANGE",
    "generate",
    "add_noise",
    "add_irrelevant",
    "load_csv",
    "save_csv",
    "split",
]

DEFAULT_RANGE = (0.5, 3.0)


@dataclass(frozen=True)
class Provenance:
    """How a synthetic dataset was built; enables clean-target recomputation."""

    equation: str
    ranges: tuple[tuple[float, float], ...]
    noise_fraction: float
    irrelevant_count: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "equation": self.equation,
            "ranges": [list(r) for r in self.ranges],
            "noise_fraction": self.noise_fraction,
            "irrelevant_count": self.irrelevant_count,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Provenance":
        return cls(
            equation=doc["equation"],
            ranges=tuple((float(lo), float(hi)) for lo, hi in doc["ranges"]),
            noise_fraction=float(doc["noise_fraction"]),
            irrelevant_count=int(doc["irrelevant_count"]),
            seed=int(doc["seed"]),
        )


@dataclass(frozen=True)
class Dataset:
    """Strictly positive inputs with a real target column."""

    inputs: np.ndarray
    targets: np.ndarray
    column_names: tuple[str, ...]
    target_name: str = "y"
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        inputs = np.array(self.inputs, dtype=np.float64, order="C")
        targets = np.array(self.targets, dtype=np.float64, order="C")
        if inputs.ndim != 2 or targets.ndim != 1:
            raise ValueError("inputs must be a matrix and targets a vector")
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError("inputs and targets disagree on row count")
        if inputs.shape[0] < 1 or inputs.shape[1] < 1:
            raise ValueError("dataset must have at least one row and one column")
        if not np.isfinite(inputs).all() or not np.isfinite(targets).all():
            raise ValueError("dataset contains NaN or infinite values")
        if inputs.min() <= 0.0:
            raise ValueError("all inputs must be strictly positive")
        if len(self.column_names) != inputs.shape[1]:
            raise ValueError("one column name per input column required")
        inputs.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n_rows(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class SamplingSpec:
    """Sampling plan for synthetic data: one (low, high) range per variable."""

    ranges: tuple[tuple[float, float], ...]
    n_points: int
    noise_fraction: float = 0.0
    irrelevant_inputs: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        ranges = tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        object.__setattr__(self, "ranges", ranges)
        for lo, hi in ranges:
            if not (0.0 < lo < hi):
                raise ValueError(f"ranges must satisfy 0 < low < high, got ({lo}, {hi})")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.noise_fraction < 0.0:
            raise ValueError("noise_fraction must be nonnegative")
        if self.irrelevant_inputs < 0:
            raise ValueError("irrelevant_inputs must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def _stream(seed: int, lane: int) -> int:
    return int(np.random.SeedSequence([seed, lane]).generate_state(1)[0])


def generate(gt: LaurentPolynomial, spec: SamplingSpec) -> Dataset:
    """Sample inputs uniformly per range, evaluate the ground truth, then
    apply noise and irrelevant-input augmentation as requested."""
    if gt.nvars != len(spec.ranges):
        raise ValueError(
            f"ground truth has {gt.nvars} variables but {len(spec.ranges)} ranges given"
        )
    rng = np.random.default_rng(_stream(spec.seed, 0))
    cols = [rng.uniform(lo, hi, spec.n_points) for lo, hi in spec.ranges]
    inputs = np.column_stack(cols) if cols else np.empty((spec.n_points, 0))
    targets = evaluate_many(gt, inputs)
    ds = Dataset(
        inputs=inputs,
        targets=targets,
        column_names=tuple(f"x{j + 1}" for j in range(gt.nvars)),
        provenance=Provenance(
            equation=print_equation(gt),
            ranges=spec.ranges,
            noise_fraction=spec.noise_fraction,
            irrelevant_count=0,
            seed=spec.seed,
        ),
    )
    if spec.noise_fraction > 0.0:
        noisy = add_noise(ds.targets, spec.noise_fraction, _stream(spec.seed, 1))
        ds = replace(ds, targets=noisy)
    if spec.irrelevant_inputs > 0:
        ds = add_irrelevant(ds, spec.irrelevant_inputs, _stream(spec.seed, 2))
    return ds


def add_noise(targets: np.ndarray, noise_fraction: float, seed: int) -> np.ndarray:
    """Add Gaussian noise with standard deviation noise_fraction * RMS of
    the given (clean) targets."""
    if noise_fraction < 0.0:
        raise ValueError("noise_fraction must be nonnegative")
    targets = np.asarray(targets, dtype=np.float64)
    if noise_fraction == 0.0:
        return targets.copy()
    rms = math.sqrt(float(np.mean(targets ** 2)))
    rng = np.random.default_rng(seed)
    return targets + noise_fraction * rms * rng.standard_normal(targets.shape[0])


def add_irrelevant(dataset: Dataset, count: int, seed: int) -> Dataset:
    """Append ``count`` uniform columns (named z1, z2, ...) spanning the
    global range of the dataset's sampling ranges; targets are untouched.
    Without provenance the observed input min/max stands in for the ranges.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return dataset
    if dataset.provenance is not None and dataset.provenance.ranges:
        lo = min(r[0] for r in dataset.provenance.ranges)
        hi = max(r[1] for r in dataset.provenance.ranges)
    else:
        lo = float(dataset.inputs.min())
        hi = float(dataset.inputs.max())
    rng = np.random.default_rng(seed)
    extra = rng.uniform(lo, hi, (dataset.n_rows, count))
    existing_z = sum(1 for name in dataset.column_names if name.startswith("z"))
    names = dataset.column_names + tuple(
        f"z{existing_z + k + 1}" for k in range(count)
    )
    prov = dataset.provenance
    if prov is not None:
        prov = replace(prov, irrelevant_count=prov.irrelevant_count + count)
    return Dataset(
        inputs=np.hstack([dataset.inputs, extra]),
        targets=dataset.targets,
        column_names=names,
        target_name=dataset.target_name,
        provenance=prov,
    )


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".provenance.json")


def save_csv(dataset: Dataset, path) -> None:
    """Write the dataset as UTF-8 CSV with LF endings; values are rendered
    as positional decimals that parse back to the identical float. A
    provenance sidecar JSON is written alongside when available."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(dataset.column_names) + [dataset.target_name])
        for i in range(dataset.n_rows):
            row = [format_number(v) for v in dataset.inputs[i]]
            row.append(format_number(dataset.targets[i]))
            writer.writerow(row)
    if dataset.provenance is not None:
        _sidecar_path(path).write_text(
            json.dumps(dataset.provenance.to_dict(), indent=2) + "\n", encoding="utf-8"
        )


def load_csv(path, target_name: str = "y") -> Dataset:
    """Read a CSV written by save_csv (or hand-made in the same shape): a
    header line, input columns, and the target as the final column. Reads
    the provenance sidecar when present."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(header) < 2:
            raise ValueError(f"{path}: need at least one input column and a target")
        if header[-1] != target_name:
            raise ValueError(
                f"{path}: target column {target_name!r} not found in final position "
                f"(header ends with {header[-1]!r})"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                values = [float(v) for v in row]
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric value") from None
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    mat = np.array(rows, dtype=np.float64)
    inputs, targets = mat[:, :-1], mat[:, -1]
    if not np.isfinite(mat).all():
        raise ValueError(f"{path}: NaN or infinite value present")
    bad = np.argwhere(inputs <= 0.0)
    if bad.size:
        i, j = bad[0]
        raise ValueError(
            f"{path}: nonpositive input at row {i + 1}, column {header[j]!r}"
        )
    provenance = None
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        provenance = Provenance.from_dict(json.loads(sidecar.read_text(encoding="utf-8")))
    return Dataset(
        inputs=inputs,
        targets=targets,
        column_names=tuple(header[:-1]),
        target_name=target_name,
        provenance=provenance,
    )


def split(dataset: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint split; the first part receives round(fraction * N)
    rows. Raises if either side would be empty."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must be in (0, 1)")
    n = dataset.n_rows
    n_first = int(round(fraction * n))
    if n_first < 1 or n - n_first < 1:
        raise ValueError(f"split of {n} rows at fraction {fraction} leaves one side empty")
    perm = np.random.default_rng(seed).permutation(n)
    first, second = perm[:n_first], perm[n_first:]

    def take(idx: np.ndarray) -> Dataset:
        return Dataset(
            inputs=dataset.inputs[idx],
            targets=dataset.targets[idx],
            column_names=dataset.column_names,
            target_name=dataset.target_name,
            provenance=dataset.provenance,
        )

    return take(first), take(second)
