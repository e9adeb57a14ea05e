"""Finite prediction pools, CSV ingestion, synthetic pools and label oracles.

A :class:`Pool` is the batch of scored predictions collected in one monitoring
interval. It is stored column-wise (numpy arrays) and is immutable after
construction. Pools that carry a true label for every instance are
*oracle-complete* and can be used for simulation and exact diagnostics.

Pool CSV layout::

    id,score,pred_label[,true_label][,attr_<name>...]

Attribute columns that parse as numbers everywhere are numeric, otherwise
categorical (strings).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, OracleIncompleteError, UncoveredIdError

REQUIRED_COLUMNS = ("id", "score", "pred_label")
ATTR_PREFIX = "attr_"
MISSING_LABEL = -1


@dataclass(frozen=True)
class Instance:
    """One scored prediction."""

    id: int
    score: float
    pred_label: int
    true_label: int | None = None
    attrs: Mapping[str, Any] = field(default_factory=dict)

    @property
    def is_defect(self) -> bool:
        if self.true_label is None:
            raise OracleIncompleteError(f"instance {self.id} has no true label")
        return self.pred_label != self.true_label


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Pool:
    """Immutable finite population of scored instances.

    Args:
        ids: unique non-negative integer ids.
        scores: proxy scores in [0, 1].
        pred_labels: predicted class per instance.
        true_labels: optional true class per instance; ``-1`` marks a missing
            label.
        attrs: optional stratification attributes, one array per name.
    """

    def __init__(
        self,
        ids: Sequence[int],
        scores: Sequence[float],
        pred_labels: Sequence[int],
        true_labels: Sequence[int] | None = None,
        attrs: Mapping[str, Sequence] | None = None,
    ):
        ids = np.asarray(ids, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.float64)
        pred = np.asarray(pred_labels, dtype=np.int64)
        n = ids.shape[0]
        if n < 1:
            raise DataError("a pool needs at least one instance")
        if scores.shape != (n,) or pred.shape != (n,):
            raise DataError("ids, scores and pred_labels must have equal length")
        if np.any(ids < 0):
            raise DataError("ids must be non-negative")
        bad = np.flatnonzero(~((scores >= 0.0) & (scores <= 1.0)))
        if bad.size:
            i = int(bad[0])
            raise DataError(f"score {scores[i]!r} of id {ids[i]} outside [0, 1]")
        uniq, counts = np.unique(ids, return_counts=True)
        if uniq.size != n:
            dup = int(uniq[np.argmax(counts > 1)])
            raise DataError(f"duplicate id {dup}")

        self._ids = _frozen(ids)
        self._scores = _frozen(scores)
        self._pred = _frozen(pred)
        if true_labels is None:
            self._true = None
        else:
            true = np.asarray(true_labels, dtype=np.int64)
            if true.shape != (n,):
                raise DataError("true_labels must match the pool length")
            self._true = _frozen(true)
        self._attrs = {}
        for name, values in (attrs or {}).items():
            arr = np.asarray(values)
            if arr.shape != (n,):
                raise DataError(f"attribute {name!r} must match the pool length")
            if arr.dtype.kind not in "biuf":
                arr = arr.astype(object)
            self._attrs[name] = _frozen(arr)
        self._pos = {int(i): k for k, i in enumerate(self._ids)}

    # -- column access -------------------------------------------------------
    @property
    def size(self) -> int:
        return int(self._ids.shape[0])

    def __len__(self) -> int:
        return self.size

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def scores(self) -> np.ndarray:
        return self._scores

    @property
    def pred_labels(self) -> np.ndarray:
        return self._pred

    @property
    def true_labels(self) -> np.ndarray | None:
        return self._true

    @property
    def attrs(self) -> Mapping[str, np.ndarray]:
        return dict(self._attrs)

    @property
    def has_labels(self) -> bool:
        return self._true is not None and bool(np.any(self._true != MISSING_LABEL))

    @property
    def oracle_complete(self) -> bool:
        return self._true is not None and bool(np.all(self._true != MISSING_LABEL))

    def require_oracle(self, what: str = "this operation") -> None:
        if not self.oracle_complete:
            raise OracleIncompleteError(f"{what} requires oracle-complete pool")

    def defects(self) -> np.ndarray:
        """Error signal z = 1{pred != true} per instance, as float64."""
        self.require_oracle("the error signal")
        return (self._pred != self._true).astype(np.float64)

    def column(self, name: str) -> np.ndarray:
        """Stratification column by name; ``score``/``pred_label`` are built in."""
        if name == "score":
            return self._scores
        if name == "pred_label":
            return self._pred
        if name == "true_label":
            self.require_oracle("stratifying on true_label")
            return self._true
        try:
            return self._attrs[name]
        except KeyError:
            raise DataError(f"attribute {name!r} missing from pool") from None

    def position(self, id_: int) -> int:
        try:
            return self._pos[int(id_)]
        except KeyError:
            raise DataError(f"id {id_} not in pool") from None

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        return np.fromiter((self.position(i) for i in ids), dtype=np.int64)

    @property
    def instances(self) -> tuple[Instance, ...]:
        out = []
        for k in range(self.size):
            true = None
            if self._true is not None and self._true[k] != MISSING_LABEL:
                true = int(self._true[k])
            attrs = {name: _py(col[k]) for name, col in self._attrs.items()}
            out.append(
                Instance(int(self._ids[k]), float(self._scores[k]), int(self._pred[k]), true, attrs)
            )
        return tuple(out)

    @classmethod
    def from_instances(cls, instances: Sequence[Instance]) -> "Pool":
        instances = list(instances)
        if not instances:
            raise DataError("a pool needs at least one instance")
        names = sorted({k for inst in instances for k in inst.attrs})
        attrs = {}
        for name in names:
            missing = [inst.id for inst in instances if name not in inst.attrs]
            if missing:
                raise DataError(f"attribute {name!r} missing on id {missing[0]}")
            attrs[name] = [inst.attrs[name] for inst in instances]
        labels = [inst.true_label for inst in instances]
        true = None
        if any(lab is not None for lab in labels):
            true = [MISSING_LABEL if lab is None else lab for lab in labels]
        return cls(
            [inst.id for inst in instances],
            [inst.score for inst in instances],
            [inst.pred_label for inst in instances],
            true,
            attrs,
        )

    def without_labels(self) -> "Pool":
        return Pool(self._ids, self._scores, self._pred, None, self._attrs)

    def __eq__(self, other):
        if not isinstance(other, Pool):
            return NotImplemented
        if self.size != other.size or set(self._attrs) != set(other._attrs):
            return False
        if (self._true is None) != (other._true is None):
            return False
        same = (
            np.array_equal(self._ids, other._ids)
            and np.array_equal(self._scores, other._scores)
            and np.array_equal(self._pred, other._pred)
            and (self._true is None or np.array_equal(self._true, other._true))
        )
        return same and all(np.array_equal(self._attrs[k], other._attrs[k]) for k in self._attrs)

    __hash__ = None

    def __repr__(self):
        flag = "oracle-complete" if self.oracle_complete else "unlabelled"
        return f"Pool(N={self.size}, {flag}, attrs={sorted(self._attrs)})"


def _py(v):
    return v.item() if isinstance(v, np.generic) else v


# -- CSV ingestion ------------------------------------------------------------


def _parse_int(text: str, col: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise DataError(f"row {line}: non-integer {col} {text!r}") from None
        if not f.is_integer():
            raise DataError(f"row {line}: non-integer {col} {text!r}") from None
        return int(f)


def _attr_column(values: list[str]):
    try:
        return np.array([float(v) for v in values], dtype=np.float64)
    except ValueError:
        return np.array(values, dtype=object)


def load_pool(path: str | Path, schema: Mapping[str, str] | None = None) -> Pool:
    """Read a pool CSV.

    Args:
        path: CSV file with a header row.
        schema: optional mapping from canonical column name (``id``, ``score``,
            ``pred_label``, ``true_label``) to the column name used in the file.

    Raises:
        DataError: missing column, duplicate id, non-numeric or out-of-range
            score (the message names the file row), or an empty file.
    """
    schema = dict(schema or {})
    col = {name: schema.get(name, name) for name in (*REQUIRED_COLUMNS, "true_label")}
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise DataError(f"{path}: empty file")
        for name in REQUIRED_COLUMNS:
            if col[name] not in header:
                raise DataError(f"{path}: missing column {col[name]!r}")
        has_true = col["true_label"] in header
        attr_cols = [h for h in header if h.startswith(ATTR_PREFIX)]

        ids, scores, pred, true = [], [], [], []
        raw_attrs = {h: [] for h in attr_cols}
        seen = {}
        for line, row in enumerate(reader, start=2):
            id_ = _parse_int(row[col["id"]], "id", line)
            if id_ < 0:
                raise DataError(f"row {line}: negative id {id_}")
            if id_ in seen:
                raise DataError(f"row {line}: duplicate id {id_} (first seen in row {seen[id_]})")
            seen[id_] = line
            text = row[col["score"]]
            try:
                s = float(text)
            except (TypeError, ValueError):
                raise DataError(f"row {line}: non-numeric score {text!r}") from None
            if not 0.0 <= s <= 1.0:
                raise DataError(f"row {line}: score {s!r} outside [0, 1]")
            ids.append(id_)
            scores.append(s)
            pred.append(_parse_int(row[col["pred_label"]], "pred_label", line))
            if has_true:
                t = (row[col["true_label"]] or "").strip()
                true.append(MISSING_LABEL if t == "" else _parse_int(t, "true_label", line))
            for h in attr_cols:
                raw_attrs[h].append(row[h])
    if not ids:
        raise DataError(f"{path}: empty file (no data rows)")
    attrs = {h[len(ATTR_PREFIX):]: _attr_column(v) for h, v in raw_attrs.items()}
    return Pool(ids, scores, pred, true if has_true else None, attrs)


def _fmt(v) -> str:
    v = _py(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_pool(pool: Pool, path: str | Path) -> None:
    """Write ``pool`` in canonical CSV form (floats via ``repr``: round-trips exactly)."""
    names = sorted(pool.attrs)
    header = list(REQUIRED_COLUMNS)
    if pool.true_labels is not None:
        header.append("true_label")
    header += [ATTR_PREFIX + n for n in names]
    attrs = pool.attrs
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(pool.size):
            row = [int(pool.ids[k]), repr(float(pool.scores[k])), int(pool.pred_labels[k])]
            if pool.true_labels is not None:
                t = int(pool.true_labels[k])
                row.append("" if t == MISSING_LABEL else t)
            row += [_fmt(attrs[n][k]) for n in names]
            w.writerow(row)


def true_defect_rate(pool: Pool) -> float:
    """Finite-population misclassification rate of an oracle-complete pool."""
    pool.require_oracle("the true defect rate")
    return int(np.count_nonzero(pool.pred_labels != pool.true_labels)) / pool.size


# -- label oracle ---------------------------------------------------------------


class LabelOracle:
    """Reveals true labels on request.

    Either backed by an oracle-complete pool (simulation) or by an external
    id -> label table (operational use). Querying an uncovered id is an error.
    """

    def __init__(self, table: Mapping[int, int]):
        self._table = {int(k): int(v) for k, v in table.items()}

    @classmethod
    def from_pool(cls, pool: Pool) -> "LabelOracle":
        pool.require_oracle("a pool-backed oracle")
        return cls(dict(zip(pool.ids.tolist(), pool.true_labels.tolist())))

    @classmethod
    def from_csv(cls, path: str | Path) -> "LabelOracle":
        """Label table CSV with columns ``id,true_label``."""
        path = Path(path)
        table = {}
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"id", "true_label"} <= set(reader.fieldnames):
                raise DataError(f"{path}: label file needs columns 'id' and 'true_label'")
            for line, row in enumerate(reader, start=2):
                id_ = _parse_int(row["id"], "id", line)
                lab = _parse_int(row["true_label"], "true_label", line)
                if id_ in table and table[id_] != lab:
                    raise DataError(f"row {line}: conflicting labels for id {id_}")
                table[id_] = lab
        return cls(table)

    def __contains__(self, id_) -> bool:
        return int(id_) in self._table

    def query(self, ids: Iterable[int]) -> dict[int, int]:
        ids = [int(i) for i in ids]
        missing = [i for i in dict.fromkeys(ids) if i not in self._table]
        if missing:
            raise UncoveredIdError(missing)
        return {i: self._table[i] for i in ids}


def oracle_query(oracle: LabelOracle, ids: Iterable[int]) -> dict[int, int]:
    """Labels for exactly the requested ids (repeats allowed)."""
    return oracle.query(ids)


def write_labels(labels: Mapping[int, int], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "true_label"])
        for k in sorted(labels):
            w.writerow([k, labels[k]])


# -- synthetic pools ------------------------------------------------------------


@dataclass(frozen=True)
class StratumLaw:
    """Generator for one synthetic stratum.

    Defective and correct items draw their score uniformly from their own
    interval inside [0, 1]; exactly ``round(size * defect_rate)`` items are
    defective.
    """

    size: int
    defect_rate: float
    defect_scores: tuple[float, float] = (0.0, 1.0)
    correct_scores: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if int(self.size) < 1:
            raise DataError("synthetic stratum size must be >= 1")
        if not 0.0 <= self.defect_rate <= 1.0:
            raise DataError(f"defect rate {self.defect_rate} outside [0, 1]")
        for lo, hi in (self.defect_scores, self.correct_scores):
            if not 0.0 <= lo <= hi <= 1.0:
                raise DataError(f"score support [{lo}, {hi}] not inside [0, 1]")

    @property
    def n_defects(self) -> int:
        return int(math.floor(self.size * self.defect_rate + 0.5))


def synth_pool(spec: Sequence[StratumLaw], seed: int, n_classes: int = 2) -> Pool:
    """Oracle-complete synthetic pool; identical output for identical (spec, seed).

    Each stratum's defect count is deterministic, so the pool's defect rate is
    known exactly. The generating stratum is stored in the ``stratum`` attr.
    """
    spec = [s if isinstance(s, StratumLaw) else StratumLaw(**s) for s in spec]
    if not spec:
        raise DataError("synthetic pool spec has no strata")
    if n_classes < 2:
        raise DataError("n_classes must be >= 2")
    rng = np.random.default_rng(seed)
    scores, pred, true, stratum = [], [], [], []
    for j, law in enumerate(spec):
        n = int(law.size)
        is_defect = np.zeros(n, dtype=bool)
        is_defect[rng.permutation(n)[: law.n_defects]] = True
        s = np.where(
            is_defect,
            rng.uniform(*law.defect_scores, size=n),
            rng.uniform(*law.correct_scores, size=n),
        )
        p = rng.integers(0, n_classes, size=n)
        shift = rng.integers(1, n_classes, size=n)
        t = np.where(is_defect, (p + shift) % n_classes, p)
        scores.append(s)
        pred.append(p)
        true.append(t)
        stratum.append(np.full(n, j, dtype=np.int64))
    scores = np.concatenate(scores)
    return Pool(
        np.arange(scores.size),
        scores,
        np.concatenate(pred),
        np.concatenate(true),
        {"stratum": np.concatenate(stratum).astype(np.float64)},
    )


def _presets(size: int) -> dict[str, list[StratumLaw]]:
    big, small = int(round(0.8 * size)), size - int(round(0.8 * size))
    return {
        # informative scores, strata aligned with the defect concentration
        "two-strata-aligned": [
            StratumLaw(big, 0.005, (0.7, 1.0), (0.0, 0.3)),
            StratumLaw(small, 0.03, (0.7, 1.0), (0.0, 0.3)),
        ],
        # defects sit where the global score is low; only within-stratum
        # ordering is informative
        "two-strata-misaligned": [
            StratumLaw(big, 0.005, (0.6, 1.0), (0.6, 1.0)),
            StratumLaw(small, 0.03, (0.2, 0.4), (0.0, 0.25)),
        ],
        # overall defect rate of 0.5%
        "low-defect": [
            StratumLaw(big, 0.0025, (0.2, 1.0), (0.0, 0.8)),
            StratumLaw(small, 0.015, (0.2, 1.0), (0.0, 0.8)),
        ],
    }


PRESETS = tuple(_presets(10_000))


def preset_spec(name: str, size: int = 10_000) -> list[StratumLaw]:
    try:
        return _presets(size)[name]
    except KeyError:
        raise DataError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


def load_synth_spec(path: str | Path) -> tuple[list[StratumLaw], int]:
    """Read a JSON synth spec: ``{"strata": [{size, defect_rate, defect_scores,
    correct_scores}, ...], "n_classes": 2}``."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("strata"), list):
        raise DataError(f"{path}: synth spec needs a 'strata' list")
    unknown = set(doc) - {"strata", "n_classes"}
    if unknown:
        raise DataError(f"{path}: unknown fields {sorted(unknown)}")
    laws = []
    for entry in doc["strata"]:
        try:
            laws.append(
                StratumLaw(
                    int(entry["size"]),
                    float(entry["defect_rate"]),
                    tuple(entry.get("defect_scores", (0.0, 1.0))),
                    tuple(entry.get("correct_scores", (0.0, 1.0))),
                )
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: bad stratum entry {entry!r} ({exc})") from None
    return laws, int(doc.get("n_classes", 2))
