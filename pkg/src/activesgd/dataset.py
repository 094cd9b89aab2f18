"""Training corpora: loading, generation, normalization, splitting.

Instances are immutable after construction. Binary problems store labels
as {+1, -1}; multi-class problems store class ids {0..C-1}.
"""

import gzip
import struct

import numpy as np
from scipy import sparse


class ParseError(ValueError):
    """Raised when an input file violates its format."""


class Instance:
    """One training example: a feature vector plus an integer label.

    Sparse instances store (indices, values) pairs with strictly increasing
    0-based indices; dense instances store the full value array and have
    ``indices is None``.
    """

    __slots__ = ("indices", "values", "label")

    def __init__(self, values, label, indices=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("feature values must be a 1-d vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        if indices is not None:
            indices = np.asarray(indices, dtype=np.int64)
            if indices.shape != values.shape:
                raise ValueError("indices and values must have equal length")
            if indices.size and indices[0] < 0:
                raise ValueError("feature indices must be non-negative")
            if indices.size > 1 and not np.all(np.diff(indices) > 0):
                raise ValueError("feature indices must be strictly increasing")
        self.indices = indices
        self.values = values
        self.label = int(label)

    @property
    def is_sparse(self):
        return self.indices is not None

    @property
    def nnz(self):
        return int(self.values.size)

    def dense(self, dimension):
        """Materialize the feature vector as a dense array of length `dimension`."""
        if self.indices is None:
            if self.values.size != dimension:
                raise ValueError(
                    f"dense instance has {self.values.size} features, expected {dimension}"
                )
            return self.values
        out = np.zeros(dimension, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"Instance({kind}, nnz={self.nnz}, label={self.label})"


class Dataset:
    """An ordered, immutable collection of instances.

    The instance id is its position in `instances`. `dimension` bounds all
    feature indices; `num_classes` is 2 for binary problems (labels +/-1)
    and C for multi-class problems (labels 0..C-1).
    """

    def __init__(self, instances, dimension, num_classes, _validate=True):
        self.instances = list(instances)
        self.dimension = int(dimension)
        self.num_classes = int(num_classes)
        self._matrix = None
        self._labels = None
        if _validate:
            self._validate()

    def _validate(self):
        if len(self.instances) < 1:
            raise ValueError("dataset must contain at least one instance")
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        for i, inst in enumerate(self.instances):
            if inst.is_sparse:
                if inst.indices.size and inst.indices[-1] >= self.dimension:
                    raise ValueError(f"instance {i}: feature index >= dimension")
            elif inst.values.size != self.dimension:
                raise ValueError(f"instance {i}: dense length != dimension")
            if self.num_classes == 2:
                if inst.label not in (-1, 1):
                    raise ValueError(f"instance {i}: binary labels must be +1/-1")
            elif not 0 <= inst.label < self.num_classes:
                raise ValueError(f"instance {i}: label outside 0..{self.num_classes - 1}")

    @property
    def n(self):
        return len(self.instances)

    def __len__(self):
        return len(self.instances)

    def __getitem__(self, i):
        return self.instances[i]

    def __iter__(self):
        return iter(self.instances)

    def labels(self):
        if self._labels is None:
            self._labels = np.array([inst.label for inst in self.instances], dtype=np.int64)
        return self._labels

    def features_matrix(self):
        """All features stacked as an (n, dimension) array.

        Returns a dense ndarray when every instance is dense, otherwise a
        CSR matrix. The result is cached.
        """
        if self._matrix is None:
            if all(not inst.is_sparse for inst in self.instances):
                self._matrix = np.vstack([inst.values for inst in self.instances])
            else:
                rows = []
                for inst in self.instances:
                    if inst.is_sparse:
                        rows.append(
                            sparse.csr_matrix(
                                (inst.values, (np.zeros(inst.nnz, dtype=np.int64), inst.indices)),
                                shape=(1, self.dimension),
                            )
                        )
                    else:
                        rows.append(sparse.csr_matrix(inst.values.reshape(1, -1)))
                self._matrix = sparse.vstack(rows, format="csr")
        return self._matrix

    def subset(self, ids):
        """New dataset keeping instances at `ids` in the given order."""
        return Dataset(
            [self.instances[int(i)] for i in ids],
            self.dimension,
            self.num_classes,
            _validate=False,
        )


def _map_labels(raw_labels, path):
    """Map raw integer labels to the internal convention.

    {-1,+1} and {0,1} become binary (+1/-1); other non-negative integer
    label sets become multi-class ids with num_classes = max + 1.
    """
    values = set(raw_labels)
    if values <= {-1, 1}:
        return list(raw_labels), 2
    if values <= {0, 1}:
        return [1 if y == 1 else -1 for y in raw_labels], 2
    if any(y < 0 for y in values):
        raise ParseError(f"{path}: cannot mix negative labels with multi-class ids")
    return list(raw_labels), max(values) + 1


def _parse_label(tok, path, ln):
    try:
        value = float(tok)
    except ValueError:
        raise ParseError(f"{path}: line {ln}: bad label {tok!r}") from None
    if value != int(value):
        raise ParseError(f"{path}: line {ln}: non-integer label {tok!r}")
    return int(value)


def load_libsvm(path, dimension=None):
    """Load a LIBSVM sparse text file (`label idx:val ...`, 1-based indices).

    Indices become 0-based. `dimension` defaults to the largest index seen
    and may be overridden upward. Instances densify when the overall fill
    ratio exceeds 0.5.
    """
    raw_labels = []
    rows = []
    max_index = 0
    nnz = 0
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            toks = line.split()
            raw_labels.append(_parse_label(toks[0], path, ln))
            idxs = []
            vals = []
            prev = 0
            for tok in toks[1:]:
                try:
                    stext, vtext = tok.split(":")
                    idx = int(stext)
                    val = float(vtext)
                except ValueError:
                    raise ParseError(f"{path}: line {ln}: bad feature {tok!r}") from None
                if idx < 1:
                    raise ParseError(f"{path}: line {ln}: index {idx} is not 1-based")
                if idx <= prev:
                    raise ParseError(f"{path}: line {ln}: indices not strictly increasing")
                if not np.isfinite(val):
                    raise ParseError(f"{path}: line {ln}: non-finite value {vtext!r}")
                prev = idx
                idxs.append(idx - 1)
                vals.append(val)
            max_index = max(max_index, prev)
            nnz += len(idxs)
            rows.append((idxs, vals))
    if not rows:
        raise ParseError(f"{path}: empty dataset")
    if dimension is None:
        if max_index == 0:
            raise ParseError(f"{path}: no features seen and no dimension override")
        dimension = max_index
    elif dimension < max_index:
        raise ParseError(f"{path}: dimension override {dimension} < max index {max_index}")

    labels, num_classes = _map_labels(raw_labels, path)
    dense = nnz / (len(rows) * dimension) > 0.5
    instances = []
    for (idxs, vals), label in zip(rows, labels):
        if dense:
            full = np.zeros(dimension, dtype=np.float64)
            full[idxs] = vals
            instances.append(Instance(full, label))
        else:
            instances.append(Instance(vals, label, indices=idxs))
    return Dataset(instances, dimension, num_classes)


def _format_label(label, num_classes):
    if num_classes == 2:
        return "+1" if label == 1 else "-1"
    return str(label)


def save_libsvm(dataset, path):
    """Write a dataset as LIBSVM text (1-based indices, exact float repr)."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in dataset:
            parts = [_format_label(inst.label, dataset.num_classes)]
            if inst.is_sparse:
                pairs = zip(inst.indices, inst.values)
            else:
                pairs = enumerate(inst.values)
            parts.extend(f"{int(i) + 1}:{float(v)!r}" for i, v in pairs)
            fh.write(" ".join(parts) + "\n")


def load_csv(path):
    """Load the small-fixture dense CSV format: `label,v0,v1,...` per line."""
    raw_labels = []
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if len(toks) < 2:
                raise ParseError(f"{path}: line {ln}: expected label and features")
            raw_labels.append(_parse_label(toks[0], path, ln))
            try:
                vals = [float(t) for t in toks[1:]]
            except ValueError:
                raise ParseError(f"{path}: line {ln}: bad feature value") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"{path}: line {ln}: ragged row")
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: empty dataset")
    labels, num_classes = _map_labels(raw_labels, path)
    instances = [Instance(vals, label) for vals, label in zip(rows, labels)]
    return Dataset(instances, width, num_classes)


def save_csv(dataset, path):
    """Write a dataset as dense CSV (`label,v0,v1,...`)."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in dataset:
            vals = inst.dense(dataset.dimension)
            fh.write(_format_label(inst.label, dataset.num_classes))
            fh.write("," + ",".join(repr(float(v)) for v in vals) + "\n")


_IDX_IMAGES_MAGIC = 0x00000803
_IDX_LABELS_MAGIC = 0x00000801


def _open_maybe_gzip(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path):
    """Load an IDX image/label pair (big-endian binary, MNIST-style).

    Image file layout: magic 0x00000803, count, rows, cols, then one
    unsigned byte per pixel. Label file: magic 0x00000801, count, then one
    byte per label. Pixels scale to [0, 1] as value/255; dimension is
    rows*cols and num_classes is fixed at 10.
    """
    with _open_maybe_gzip(images_path) as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise ParseError(f"{images_path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != _IDX_IMAGES_MAGIC:
            raise ParseError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{_IDX_IMAGES_MAGIC:08x}")
        payload = fh.read(count * rows * cols + 1)
        if len(payload) != count * rows * cols:
            raise ParseError(f"{images_path}: pixel payload size mismatch")
    with _open_maybe_gzip(labels_path) as fh:
        header = fh.read(8)
        if len(header) < 8:
            raise ParseError(f"{labels_path}: truncated IDX header")
        magic, label_count = struct.unpack(">II", header)
        if magic != _IDX_LABELS_MAGIC:
            raise ParseError(f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{_IDX_LABELS_MAGIC:08x}")
        label_bytes = fh.read(label_count + 1)
        if len(label_bytes) != label_count:
            raise ParseError(f"{labels_path}: label payload size mismatch")
    if count != label_count:
        raise ParseError(f"{images_path}: {count} images but {label_count} labels")

    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    pixels = pixels.reshape(count, rows * cols)
    labels = np.frombuffer(label_bytes, dtype=np.uint8)
    if labels.size and labels.max() > 9:
        raise ParseError(f"{labels_path}: label {labels.max()} outside 0..9")
    instances = [Instance(pixels[i], int(labels[i])) for i in range(count)]
    return Dataset(instances, rows * cols, 10)


def synth_biased(n, dim, easy_fraction, margin, seed):
    """Generate a separable binary dataset mixing easy and hard points.

    A fixed random unit hyperplane labels each point by side. An
    `easy_fraction` share of points sit at signed distance in
    [5*margin, 10*margin]; the rest sit within [0.25*margin, margin] of the
    boundary. Labels always agree with the hyperplane side. Deterministic
    in `seed`.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if not 0.0 <= easy_fraction <= 1.0:
        raise ValueError("easy_fraction must be in [0, 1]")
    if margin <= 0:
        raise ValueError("margin must be positive")
    rng = np.random.default_rng(seed)
    normal = rng.normal(size=dim)
    normal /= np.linalg.norm(normal)

    n_easy = int(round(easy_fraction * n))
    easy = np.zeros(n, dtype=bool)
    easy[:n_easy] = True
    easy = rng.permutation(easy)

    base = rng.normal(size=(n, dim))
    base -= np.outer(base @ normal, normal)
    dist = np.where(
        easy,
        rng.uniform(5.0 * margin, 10.0 * margin, size=n),
        rng.uniform(0.25 * margin, margin, size=n),
    )
    sides = rng.integers(0, 2, size=n) * 2 - 1
    points = base + np.outer(sides * dist, normal)
    instances = [Instance(points[i], int(sides[i])) for i in range(n)]
    return Dataset(instances, dim, 2)


def split(dataset, test_fraction, seed):
    """Partition into disjoint (train, test) of sizes ceil(n(1-f)), floor(nf)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = dataset.n
    n_test = int(np.floor(n * test_fraction))
    n_train = n - n_test
    if n_test == 0 or n_train == 0:
        raise ValueError(f"split of n={n} at f={test_fraction} leaves an empty partition")
    perm = np.random.default_rng(seed).permutation(n)
    train_ids = np.sort(perm[:n_train])
    test_ids = np.sort(perm[n_train:])
    return dataset.subset(train_ids), dataset.subset(test_ids)
