"""Multi-label dataset containers, ARFF/CSV readers, normalization and splits.

Only the ARFF subset needed for Mulan-style benchmarks is understood:
numeric attributes and binary nominal attributes ``{0,1}``. Label columns are
selected by name (ARFF) or by the trailing-columns convention (CSV).
"""

import csv
import io
import math
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataError, LabelValidationError, ParseError, UnsupportedFeatureError

#: Name of the pseudo-random generator behind :func:`random_split`.
PRNG_ALGORITHM = "numpy.random.PCG64(SeedSequence([seed, split_index])) + Fisher-Yates"


@dataclass(frozen=True, eq=False)
class MultiLabelDataset:
    """N instances with d real features and K binary labels.

    ``features`` is an ``(N, d)`` float array, ``labels`` an ``(N, K)`` int8
    array of 0/1 entries. Arrays are made read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...]
    label_names: Tuple[str, ...]

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2 or labels.ndim != 2:
            raise DataError("features and labels must be 2-D")
        n, d = features.shape
        if labels.shape[0] != n:
            raise DataError(f"{n} feature rows but {labels.shape[0]} label rows")
        k = labels.shape[1]
        if n < 1 or d < 1 or k < 1:
            raise DataError(f"need N, d, K >= 1, got N={n}, d={d}, K={k}")
        if not np.all(np.isfinite(features)):
            raise DataError("features must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise LabelValidationError("label entries must be 0 or 1")
        feature_names = tuple(str(s) for s in self.feature_names)
        label_names = tuple(str(s) for s in self.label_names)
        if len(feature_names) != d or len(label_names) != k:
            raise DataError("name lists do not match matrix shapes")
        if len(set(feature_names)) != d or len(set(label_names)) != k:
            raise DataError("duplicate feature or label names")
        if set(feature_names) & set(label_names):
            raise DataError("feature and label names overlap")
        labels = labels.astype(np.int8)
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "label_names", label_names)

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_labels(self) -> int:
        return self.labels.shape[1]

    def subset(self, indices) -> "MultiLabelDataset":
        idx = np.asarray(indices, dtype=np.intp)
        return MultiLabelDataset(self.features[idx], self.labels[idx],
                                 self.feature_names, self.label_names)

    def with_features(self, features) -> "MultiLabelDataset":
        return MultiLabelDataset(features, self.labels, self.feature_names, self.label_names)

    def to_csv(self) -> str:
        """Serialize with features first and labels as trailing columns.

        Floats are written with ``repr`` so that :func:`parse_csv` restores
        them bit for bit.
        """
        out = io.StringIO()
        out.write(",".join(self.feature_names + self.label_names) + "\n")
        for x, y in zip(self.features, self.labels):
            out.write(",".join([repr(float(v)) for v in x] + [str(int(b)) for b in y]) + "\n")
        return out.getvalue()


# ---------------------------------------------------------------------------
# ARFF

_ATTRIBUTE_RE = re.compile(
    r"""^@attribute\s+('(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*"|\S+)\s+(.+?)\s*$""",
    re.IGNORECASE,
)
_NUMERIC_TYPES = {"numeric", "real", "integer"}


def _unquote(name: str) -> str:
    if len(name) >= 2 and name[0] == name[-1] and name[0] in "'\"":
        return name[1:-1].replace("\\" + name[0], name[0])
    return name


def _parse_attribute_type(spec: str, lineno: int) -> str:
    if spec.lower() in _NUMERIC_TYPES:
        return "numeric"
    if spec.startswith("{") and spec.endswith("}"):
        values = [v.strip().strip("'\"") for v in spec[1:-1].split(",")]
        if sorted(values) == ["0", "1"]:
            return "binary"
        raise ParseError(f"unsupported nominal attribute {spec} (only {{0,1}} is allowed)", line=lineno)
    raise ParseError(f"unknown attribute type {spec!r}", line=lineno)


def _to_float(token: str, lineno: int, column: int) -> float:
    if token == "?":
        raise UnsupportedFeatureError(f"line {lineno}, column {column}: missing values ('?') are not supported")
    try:
        value = float(token.strip("'\""))
    except ValueError:
        raise ParseError(f"non-numeric value {token!r}", line=lineno, column=column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {token!r}", line=lineno, column=column)
    return value


def _assemble(rows, names, label_names: Sequence[str], line_numbers) -> MultiLabelDataset:
    label_set = list(label_names)
    name_to_col = {n: i for i, n in enumerate(names)}
    missing = [n for n in label_set if n not in name_to_col]
    if missing:
        raise ConfigError(f"label attributes not found: {missing}")
    label_cols = [i for i, n in enumerate(names) if n in set(label_set)]
    feature_cols = [i for i, n in enumerate(names) if n not in set(label_set)]
    if not rows:
        raise DataError("no data rows")
    if not feature_cols:
        raise ConfigError("every column is a label; need at least one feature")
    table = np.array(rows, dtype=np.float64)
    labels = table[:, label_cols]
    bad = np.argwhere((labels != 0) & (labels != 1))
    if bad.size:
        r, c = bad[0]
        raise LabelValidationError(
            f"line {line_numbers[r]}: label {names[label_cols[c]]!r} has value {labels[r, c]:g}, expected 0 or 1"
        )
    return MultiLabelDataset(
        features=table[:, feature_cols],
        labels=labels.astype(np.int8),
        feature_names=[names[i] for i in feature_cols],
        label_names=[names[i] for i in label_cols],
    )


def parse_arff(text, label_names: Iterable[str]) -> MultiLabelDataset:
    """Parse a dense ARFF document, splitting off the columns in ``label_names``.

    ``text`` may be a string or a text stream. Label columns keep the order in
    which they are declared in the header.
    """
    if not isinstance(text, str):
        text = text.read()
    label_names = list(label_names)
    if not label_names:
        raise ConfigError("label_names must be nonempty")

    names, types, rows, line_numbers = [], [], [], []
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if not in_data:
            head = line.split(None, 1)[0].lower()
            if head == "@relation":
                continue
            if head == "@attribute":
                m = _ATTRIBUTE_RE.match(line)
                if m is None:
                    raise ParseError("malformed @attribute declaration", line=lineno)
                names.append(_unquote(m.group(1)))
                types.append(_parse_attribute_type(m.group(2).strip(), lineno))
                continue
            if head == "@data":
                in_data = True
                continue
            raise ParseError(f"unexpected header line {line!r}", line=lineno)
        if line.startswith("{"):
            raise UnsupportedFeatureError(f"line {lineno}: sparse ARFF rows are not supported")
        tokens = [t.strip() for t in line.split(",")]
        if len(tokens) != len(names):
            raise ParseError(f"expected {len(names)} values, found {len(tokens)}", line=lineno)
        rows.append([_to_float(t, lineno, j + 1) for j, t in enumerate(tokens)])
        line_numbers.append(lineno)
    if not in_data:
        raise ParseError("no @data section")
    if len(set(names)) != len(names):
        raise ParseError("duplicate attribute names")
    return _assemble(rows, names, label_names, line_numbers)


def parse_csv(text, n_labels: int) -> MultiLabelDataset:
    """Parse a headed CSV whose last ``n_labels`` columns are labels."""
    if not isinstance(text, str):
        text = text.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV input", line=1) from None
    header = [h.strip() for h in header]
    if n_labels < 1 or n_labels >= len(header):
        raise ConfigError(f"n_labels={n_labels} must be in [1, {len(header) - 1}] for {len(header)} columns")
    rows, line_numbers = [], []
    for lineno, tokens in enumerate(reader, start=2):
        if not tokens or all(not t.strip() for t in tokens):
            continue
        if len(tokens) != len(header):
            raise ParseError(f"expected {len(header)} values, found {len(tokens)}", line=lineno)
        rows.append([_to_float(t.strip(), lineno, j + 1) for j, t in enumerate(tokens)])
        line_numbers.append(lineno)
    return _assemble(rows, header, header[-n_labels:], line_numbers)


def read_label_xml(text) -> list:
    """Label names from a Mulan label file (flat list of ``<label name=".."/>``)."""
    if not isinstance(text, str):
        text = text.read()
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"invalid label XML: {exc}") from None
    names = [el.get("name") for el in root.iter() if el.tag.rsplit("}", 1)[-1] == "label"]
    if not names or any(n is None for n in names):
        raise ParseError("label XML must contain <label name=\"...\"/> entries")
    return names


def load_dataset(path, label_names: Optional[Sequence[str]] = None,
                 labels_xml=None, n_labels: Optional[int] = None) -> MultiLabelDataset:
    """Read a dataset file, dispatching on the extension (``.arff`` or CSV)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if labels_xml is not None:
        label_names = read_label_xml(Path(labels_xml).read_text(encoding="utf-8"))
    if path.suffix.lower() == ".arff":
        if label_names is None:
            raise ConfigError("ARFF input needs label names (--labels or --labels-xml)")
        return parse_arff(text, label_names)
    if n_labels is None:
        if label_names is None:
            raise ConfigError("CSV input needs --n-labels")
        n_labels = len(label_names)
    return parse_csv(text, n_labels)


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True, eq=False)
class NormalizationModel:
    """Per-feature min-max scaling into [0, 1] with clamping."""

    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.mins.shape[0]:
            raise DataError(f"expected {self.mins.shape[0]} features, got {x.shape[-1]}")
        span = self.maxs - self.mins
        constant = span == 0
        scaled = (x - self.mins) / np.where(constant, 1.0, span)
        scaled = np.where(constant, 0.5, scaled)
        return np.clip(scaled, 0.0, 1.0)

    def transform(self, dataset: MultiLabelDataset) -> MultiLabelDataset:
        return dataset.with_features(self.apply(dataset.features))


def fit_normalizer(dataset: MultiLabelDataset, train_indices) -> NormalizationModel:
    idx = np.asarray(list(train_indices) if not isinstance(train_indices, np.ndarray) else train_indices,
                     dtype=np.intp)
    if idx.size == 0:
        raise ConfigError("cannot fit a normalizer on an empty index set")
    rows = dataset.features[idx]
    mins, maxs = rows.min(axis=0), rows.max(axis=0)
    mins.setflags(write=False)
    maxs.setflags(write=False)
    return NormalizationModel(mins, maxs)


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    n_train: int
    split_index: int = 0


def random_split(n_total: int, spec: SplitSpec):
    """Shuffle ``0..n_total-1`` and cut it into train and test index arrays.

    The shuffle is an explicit Fisher-Yates pass whose swap positions come
    from PCG64 seeded with ``SeedSequence([seed, split_index])``, so a given
    spec always yields the same partition.
    """
    if not 0 < spec.n_train < n_total:
        raise ConfigError(f"n_train must satisfy 0 < n_train < {n_total}, got {spec.n_train}")
    if spec.seed < 0 or spec.split_index < 0:
        raise ConfigError("seed and split_index must be non-negative")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, spec.split_index])))
    perm = list(range(n_total))
    for i in range(n_total - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    perm = np.array(perm, dtype=np.intp)
    return np.sort(perm[: spec.n_train]), np.sort(perm[spec.n_train:])
