"""Tabular datasets for federated simulation.

A dataset is a float feature matrix plus two binary columns: the label and
a sensitive-group indicator (1 = advantaged group "a", 0 = disadvantaged
group "d").  This module covers the full data path: CSV ingestion under an
explicit schema, synthetic generation, label-rate skewing (the adversarial
client model), partitioning into client shards, and the validation split.

All randomness is drawn from explicit seeds; every function is pure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    EmptyDatasetError,
    InfeasibleSkewError,
    InvalidPartitionError,
    InvalidValidationSplitError,
    RowParseError,
    SchemaError,
)
from .seeding import derive_seed

GROUP_D = 0  # disadvantaged
GROUP_A = 1  # advantaged

BEHAVIORS = ("cooperative", "normal", "uncooperative")

# bounded retries for the validation-split coverage requirement
_SPLIT_RETRIES = 32


@dataclass(frozen=True)
class TabularDataset:
    """Immutable feature matrix with binary labels and group membership."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) int, values {0, 1}
    sensitive: np.ndarray  # (n,) int, values {0=d, 1=a}

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        sens = np.ascontiguousarray(self.sensitive, dtype=np.int64)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {feats.shape}")
        n = feats.shape[0]
        if n < 1:
            raise EmptyDatasetError("dataset must contain at least one row")
        if labels.shape != (n,) or sens.shape != (n,):
            raise DataError(
                f"row count mismatch: features {n}, labels {labels.shape}, sensitive {sens.shape}"
            )
        if not np.all(np.isfinite(feats)):
            raise DataError("features contain non-finite values")
        if not np.isin(labels, (0, 1)).all():
            raise DataError("labels must be binary 0/1")
        if not np.isin(sens, (0, 1)).all():
            raise DataError("sensitive column must be binary 0/1")
        for arr, name in ((feats, "features"), (labels, "labels"), (sens, "sensitive")):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "TabularDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return TabularDataset(self.features[idx], self.labels[idx], self.sensitive[idx])


@dataclass(frozen=True)
class ColumnSpec:
    """One raw CSV column: numeric (z-scored) or categorical (one-hot)."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "categories", tuple(self.categories))
        if self.kind == "categorical" and not self.categories:
            raise SchemaError(f"column {self.name!r}: categorical columns must declare categories")
        if self.kind == "numeric" and self.categories:
            raise SchemaError(f"column {self.name!r}: numeric columns take no categories")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"column {self.name!r}: duplicate categories")


@dataclass(frozen=True)
class DatasetSchema:
    """Declares how raw CSV columns map onto features, label, and group."""

    features: tuple[ColumnSpec, ...]
    label: str
    label_positive: str
    sensitive: str
    sensitive_advantaged: str

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise SchemaError("schema declares no feature columns")
        names = [c.name for c in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature column names")
        if self.label == self.sensitive:
            raise SchemaError("label and sensitive columns must differ")
        for special in (self.label, self.sensitive):
            if special in names:
                raise SchemaError(f"column {special!r} cannot be both special and a feature")

    @staticmethod
    def from_dict(raw: dict) -> "DatasetSchema":
        try:
            feats = tuple(
                ColumnSpec(
                    name=c["name"],
                    kind=c["kind"],
                    categories=tuple(c.get("categories", ())),
                )
                for c in raw["features"]
            )
            return DatasetSchema(
                features=feats,
                label=raw["label"]["column"],
                label_positive=str(raw["label"]["positive"]),
                sensitive=raw["sensitive"]["column"],
                sensitive_advantaged=str(raw["sensitive"]["advantaged"]),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc!r}") from exc

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": c.name, "kind": c.kind}
                if c.kind == "numeric"
                else {"name": c.name, "kind": c.kind, "categories": list(c.categories)}
                for c in self.features
            ],
            "label": {"column": self.label, "positive": self.label_positive},
            "sensitive": {"column": self.sensitive, "advantaged": self.sensitive_advantaged},
        }


@dataclass(frozen=True)
class SkewSpec:
    """Subsampling recipe that biases a shard's label distribution.

    ratio: positive-rate ratio rate_d / rate_a to enforce, in (0, 1].
    retain: fraction of rows kept (per group) before the ratio adjustment.
    group: which group's positives are subsampled to hit the ratio.
    """

    ratio: float
    retain: float = 1.0
    group: str = "d"

    def __post_init__(self):
        if not (0.0 < self.ratio <= 1.0):
            raise DataError(f"skew ratio must lie in (0, 1], got {self.ratio}")
        if not (0.0 < self.retain <= 1.0):
            raise DataError(f"skew retain fraction must lie in (0, 1], got {self.retain}")
        if self.group not in ("a", "d"):
            raise DataError(f"skew group must be 'a' or 'd', got {self.group!r}")


@dataclass(frozen=True)
class ClientSpec:
    """Requested behavior for one simulated client."""

    behavior: str = "cooperative"
    skew: SkewSpec | None = None

    def __post_init__(self):
        if self.behavior not in BEHAVIORS:
            raise DataError(f"unknown behavior {self.behavior!r}; expected one of {BEHAVIORS}")


@dataclass(frozen=True)
class ClientProfile:
    """A client's local shard plus its declared behavior."""

    client_id: int
    behavior: str
    data: TabularDataset
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", self.data.n)


def load_csv(path, schema: DatasetSchema) -> TabularDataset:
    """Read a comma-separated file (UTF-8, header row) under `schema`.

    Numeric columns are z-score standardized over the whole file; a
    zero-variance column becomes all zeros.  Categorical columns expand to
    one-hot indicators in declared category order.  Cells are whitespace-
    stripped before interpretation; empty cells are hard errors.  Columns
    not mentioned by the schema are ignored.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        col_index = {name: i for i, name in enumerate(header)}
        needed = [c.name for c in schema.features] + [schema.label, schema.sensitive]
        for name in needed:
            if name not in col_index:
                raise SchemaError(f"{path}: column {name!r} not found in header")

        rows, labels, sens = [], [], []
        for rownum, raw in enumerate(reader, start=1):
            if len(raw) != len(header):
                raise RowParseError(
                    f"{path}: row {rownum}: expected {len(header)} cells, got {len(raw)}"
                )
            cells = [c.strip() for c in raw]
            feats: list[float] = []
            for spec in schema.features:
                cell = cells[col_index[spec.name]]
                if cell == "":
                    raise RowParseError(f"{path}: row {rownum}: column {spec.name!r} is empty")
                if spec.kind == "numeric":
                    try:
                        feats.append(float(cell))
                    except ValueError:
                        raise RowParseError(
                            f"{path}: row {rownum}: column {spec.name!r}: "
                            f"cannot parse {cell!r} as a number"
                        ) from None
                else:
                    if cell not in spec.categories:
                        raise RowParseError(
                            f"{path}: row {rownum}: column {spec.name!r}: "
                            f"value {cell!r} not in declared categories"
                        )
                    feats.extend(1.0 if cell == cat else 0.0 for cat in spec.categories)
            for col, store, positive in (
                (schema.label, labels, schema.label_positive),
                (schema.sensitive, sens, schema.sensitive_advantaged),
            ):
                cell = cells[col_index[col]]
                if cell == "":
                    raise RowParseError(f"{path}: row {rownum}: column {col!r} is empty")
                store.append(1 if cell == positive else 0)
            rows.append(feats)

    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")

    features = np.asarray(rows, dtype=np.float64)
    # standardize only the numeric source columns; one-hot stays 0/1
    offset = 0
    for spec in schema.features:
        width = 1 if spec.kind == "numeric" else len(spec.categories)
        if spec.kind == "numeric":
            col = features[:, offset]
            std = col.std()
            if std == 0.0:
                features[:, offset] = 0.0
            else:
                features[:, offset] = (col - col.mean()) / std
        offset += width
    return TabularDataset(features, np.asarray(labels), np.asarray(sens))


def generate_synthetic(n: int, dim: int, group_positive_rates, seed: int) -> TabularDataset:
    """Sample a learnable binary-classification dataset with two groups.

    Rows split evenly between groups a and d (group a takes the odd row).
    Labels are Bernoulli with the per-group positive rate.  Features are
    unit Gaussians shifted along two fixed directions, one by the label and
    one by the group, so a linear model can recover the label while group
    membership stays visible in the features.
    """
    if n < 2:
        raise DataError(f"synthetic dataset needs n >= 2, got {n}")
    if dim < 1:
        raise DataError(f"synthetic dataset needs dim >= 1, got {dim}")
    rate_a, rate_d = float(group_positive_rates[0]), float(group_positive_rates[1])
    for rate in (rate_a, rate_d):
        if not (0.0 <= rate <= 1.0):
            raise DataError(f"positive rate {rate} outside [0, 1]")

    rng = np.random.default_rng(seed)
    n_a = (n + 1) // 2
    n_d = n - n_a
    labels = np.concatenate(
        [
            (rng.random(n_a) < rate_a).astype(np.int64),
            (rng.random(n_d) < rate_d).astype(np.int64),
        ]
    )
    groups = np.concatenate(
        [np.full(n_a, GROUP_A, dtype=np.int64), np.full(n_d, GROUP_D, dtype=np.int64)]
    )

    # signal strengths chosen so the label is learnable (~0.8 accuracy at
    # unit noise) while group membership stays visible enough that training
    # on label-skewed shards produces measurably biased models
    label_dir = np.ones(dim) / np.sqrt(dim)
    group_dir = np.array([1.0 if j % 2 == 0 else -1.0 for j in range(dim)]) / np.sqrt(dim)
    centers = (
        0.9 * (2.0 * labels - 1.0)[:, None] * label_dir[None, :]
        + 1.25 * (2.0 * groups - 1.0)[:, None] * group_dir[None, :]
    )
    features = centers + rng.standard_normal((n, dim))

    perm = rng.permutation(n)
    return TabularDataset(features[perm], labels[perm], groups[perm])


def _group_stats(labels, sensitive, group_value):
    mask = sensitive == group_value
    total = int(mask.sum())
    pos = int(labels[mask].sum())
    return mask, total, pos


def skew(dataset: TabularDataset, spec: SkewSpec, seed: int) -> TabularDataset:
    """Subsample `dataset` until rate_d equals spec.ratio * rate_a.

    Only removes rows (never fabricates): first keeps `retain` of each
    group, then drops positives of the target group until the positive-rate
    ratio holds up to integer rounding of counts.
    """
    rng = np.random.default_rng(seed)
    keep = np.arange(dataset.n)

    for group_value in (GROUP_A, GROUP_D):
        if not (dataset.sensitive == group_value).any():
            name = "a" if group_value == GROUP_A else "d"
            raise InfeasibleSkewError(f"dataset has no rows for group {name!r}")

    if spec.retain < 1.0:
        kept_parts = []
        for group_value in (GROUP_A, GROUP_D):
            members = keep[dataset.sensitive[keep] == group_value]
            target = max(1, int(round(spec.retain * len(members))))
            kept_parts.append(rng.choice(members, size=target, replace=False))
        keep = np.sort(np.concatenate(kept_parts))

    labels = dataset.labels[keep]
    sens = dataset.sensitive[keep]
    target_value = GROUP_A if spec.group == "a" else GROUP_D
    _, n_t, pos_t = _group_stats(labels, sens, target_value)
    _, n_o, pos_o = _group_stats(labels, sens, GROUP_D if spec.group == "a" else GROUP_A)
    other_rate = pos_o / n_o
    current_rate = pos_t / n_t

    # solving rate_d = ratio * rate_a for the target group's new rate
    if spec.group == "d":
        wanted = spec.ratio * other_rate
        bound = "at most" if other_rate > 0 else "exactly"
        achievable = current_rate / other_rate if other_rate > 0 else None
    else:
        wanted = other_rate / spec.ratio
        achievable = other_rate / current_rate if current_rate > 0 else None
        bound = "at least"

    if wanted > current_rate + 1e-12:
        msg = f"requested ratio {spec.ratio} infeasible by subsampling group {spec.group!r} positives"
        if achievable is not None:
            msg += f"; achievable ratio is {bound} {achievable:.6f}"
        raise InfeasibleSkewError(msg)

    if wanted >= 1.0:
        removals = 0
    else:
        removals = int(round((pos_t - wanted * n_t) / (1.0 - wanted)))
        removals = min(max(removals, 0), pos_t)
    if n_t - removals < 1:
        raise InfeasibleSkewError(
            f"requested ratio {spec.ratio} would empty group {spec.group!r}"
        )

    if removals > 0:
        candidates = keep[(dataset.sensitive[keep] == target_value) & (dataset.labels[keep] == 1)]
        dropped = set(rng.choice(candidates, size=removals, replace=False).tolist())
        keep = np.array([i for i in keep if i not in dropped], dtype=np.int64)

    return dataset.subset(keep)


def partition(dataset: TabularDataset, profiles, seed: int) -> list[ClientProfile]:
    """Deal rows into near-equal client shards, then apply per-client skew.

    Shard sizes differ by at most one before skewing; remainder rows go to
    the lowest-indexed shards.  Each skew draws from a seed derived from
    (seed, shard index) so shards stay independent.
    """
    profiles = list(profiles)
    if not profiles:
        raise InvalidPartitionError("need at least one client profile")
    if len(profiles) > dataset.n:
        raise InvalidPartitionError(
            f"cannot split {dataset.n} rows across {len(profiles)} clients"
        )
    perm = np.random.default_rng(seed).permutation(dataset.n)
    base, extra = divmod(dataset.n, len(profiles))

    clients = []
    start = 0
    for i, spec in enumerate(profiles):
        if isinstance(spec, str):
            spec = ClientSpec(behavior=spec)
        size = base + (1 if i < extra else 0)
        shard = dataset.subset(np.sort(perm[start : start + size]))
        start += size
        if spec.skew is not None:
            shard = skew(shard, spec.skew, derive_seed(seed, "skew", i))
        clients.append(ClientProfile(client_id=i, behavior=spec.behavior, data=shard))
    return clients


def split_validation(dataset: TabularDataset, fraction: float, seed: int):
    """Split off a validation side that covers both groups and both labels.

    Returns (train, validation).  The validation side holds round(fraction
    * n) rows; the shuffle is re-drawn (bounded retries) until validation
    contains at least one row of each group and each label.
    """
    if not (0.0 < fraction < 1.0):
        raise InvalidValidationSplitError(f"fraction must lie in (0, 1), got {fraction}")
    m = int(round(fraction * dataset.n))
    if m < 1 or dataset.n - m < 1:
        raise InvalidValidationSplitError(
            f"fraction {fraction} leaves an empty side for {dataset.n} rows"
        )
    if len(np.unique(dataset.sensitive)) < 2 or len(np.unique(dataset.labels)) < 2:
        raise InvalidValidationSplitError(
            "dataset lacks a group or a label value; no split can cover both"
        )

    for attempt in range(_SPLIT_RETRIES):
        perm = np.random.default_rng(derive_seed(seed, "validation", attempt)).permutation(
            dataset.n
        )
        val_idx = perm[:m]
        val_labels = dataset.labels[val_idx]
        val_sens = dataset.sensitive[val_idx]
        if (
            len(np.unique(val_sens)) == 2
            and len(np.unique(val_labels)) == 2
        ):
            train = dataset.subset(np.sort(perm[m:]))
            validation = dataset.subset(np.sort(val_idx))
            return train, validation
    raise InvalidValidationSplitError(
        f"validation side missed a group or label in {_SPLIT_RETRIES} shuffles"
    )
