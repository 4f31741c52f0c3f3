"""Dataset ingestion and generation.

* CSV files are parsed with :mod:`pandas` according to a :class:`CsvSchema`.
* The iris data ships with :mod:`sklearn.datasets`; a CSV copy may be used instead.
* Circles and spheres are generated: points on concentric shells with
  Gaussian radial noise and alternating labels.
* FashionMNIST is read from its IDX files (optionally gzip-compressed).

Examples
--------
.. code:: python

    >>> from semiringlib.data import gen_circles, train_test_split

    >>> ds = gen_circles(100, seed=0)
    >>> ds.features.shape, ds.n_classes
    ((100, 2), 2)
    >>> train, test = train_test_split(ds, test_fraction=0.2, seed=42)
    >>> len(train), len(test)
    (80, 20)

Index
-----
.. currentmodule:: semiringlib.data
.. autosummary::
    Dataset
    CsvSchema
    HEART_SCHEMA
    IRIS_SCHEMA
    DATASETS
    UNCENTERED_DATASETS
    SHELL_RADII
    SHELL_NOISE_SD
    load_csv
    load_iris
    gen_circles
    gen_spheres
    load_fashion_mnist
    train_test_split
    standardize
    concat_datasets
    to_csv
    load_split

API
---
.. autoclass:: Dataset
.. autoclass:: CsvSchema
.. autodata:: HEART_SCHEMA
.. autodata:: IRIS_SCHEMA
.. autodata:: DATASETS
.. autodata:: UNCENTERED_DATASETS
.. autodata:: SHELL_RADII
.. autodata:: SHELL_NOISE_SD
.. autofunction:: load_csv
.. autofunction:: load_iris
.. autofunction:: gen_circles
.. autofunction:: gen_spheres
.. autofunction:: load_fashion_mnist
.. autofunction:: train_test_split
.. autofunction:: standardize
.. autofunction:: concat_datasets
.. autofunction:: to_csv
.. autofunction:: load_split

"""

import os
import gzip
import logging
from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn import datasets as sk_datasets
from sklearn import model_selection
from sklearn.preprocessing import StandardScaler

from .exceptions import ConfigError, DataFormatError

__all__ = [
    'Dataset', 'CsvSchema', 'HEART_SCHEMA', 'IRIS_SCHEMA', 'DATASETS', 'UNCENTERED_DATASETS',
    'SHELL_RADII', 'SHELL_NOISE_SD',
    'load_csv', 'load_iris', 'gen_circles', 'gen_spheres', 'load_fashion_mnist',
    'train_test_split', 'standardize', 'concat_datasets', 'to_csv', 'load_split'
]

logger = logging.getLogger(__name__)

PathType = Union[str, os.PathLike]

#: The names of the supported datasets.
DATASETS: Tuple[str, ...] = ('iris', 'heart', 'circles', 'spheres', 'fashion')

#: The datasets whose features are scaled to unit variance without centering.
#: Their models hold neither biases nor normalization layers.
UNCENTERED_DATASETS: FrozenSet[str] = frozenset({'iris', 'heart'})

#: The default shell radii of :func:`gen_circles` and :func:`gen_spheres`.
SHELL_RADII: Tuple[float, ...] = (1.0, 1.5, 2.0, 2.5)

#: The default standard deviation of the radial noise of the shells.
SHELL_NOISE_SD = 0.1

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    """A labelled dataset.

    Parameters
    ----------
    features : :class:`numpy.ndarray`, shape :math:`(N, n)`
        The finite, floating-point feature matrix.

    labels : :class:`numpy.ndarray`, shape :math:`(N,)`
        Integer labels in ``[0, n_classes)``.

    n_classes : :class:`int`
        The number of classes.

    name : :class:`str`
        The name of the dataset.

    feature_names : :class:`tuple` [:class:`str`]
        Optional column names, *e.g.* the one-hot encoded columns of a CSV file.

    Raises
    ------
    DataFormatError
        Raised if the features contain NaN or infinite values or the labels are out of range.

    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = ''
    feature_names: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        features = np.asarray(self.features)
        if features.dtype.kind != 'f':
            features = features.astype(np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

        if features.ndim != 2 or labels.shape != features.shape[:1]:
            raise DataFormatError(f"dataset {self.name!r}: features of shape {features.shape} "
                                  f"do not match labels of shape {labels.shape}")
        elif not np.isfinite(features).all():
            row = int(np.argwhere(~np.isfinite(features))[0, 0])
            raise DataFormatError(f"dataset {self.name!r}: non-finite feature in row {row}")
        elif len(labels) and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DataFormatError(f"dataset {self.name!r}: labels must lie in "
                                  f"[0, {self.n_classes}); observed range "
                                  f"[{labels.min()}, {labels.max()}]")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        """The number of features per sample."""
        return self.features.shape[1]

    def subset(self, index: np.ndarray, name: Optional[str] = None) -> 'Dataset':
        """Return the rows selected by **index**."""
        return Dataset(self.features[index], self.labels[index], self.n_classes,
                       self.name if name is None else name, self.feature_names)

    def astype(self, dtype: Union[str, np.dtype]) -> 'Dataset':
        """Return a copy with the features cast to **dtype**."""
        return Dataset(self.features.astype(dtype), self.labels, self.n_classes,
                       self.name, self.feature_names)


@dataclass(frozen=True)
class CsvSchema:
    """The column layout of a CSV file.

    Parameters
    ----------
    label : :class:`str`
        The label column.

    categorical : :class:`tuple` [:class:`str`]
        Columns which are one-hot encoded.

    columns : :class:`tuple` [:class:`str`], optional
        The expected numeric feature columns. All non-label, non-categorical columns if ``None``.

    label_values : :class:`tuple` [:class:`str`], optional
        The admissible labels in class order.
        Labels are sorted and numbered consecutively if ``None``.

    """

    label: str
    categorical: Tuple[str, ...] = ()
    columns: Optional[Tuple[str, ...]] = None
    label_values: Optional[Tuple[str, ...]] = None


#: The heart-disease CSV layout: 13 attributes, a binary ``target`` and five categorical columns.
HEART_SCHEMA = CsvSchema(
    label='target',
    categorical=('cp', 'restecg', 'slope', 'ca', 'thal'),
    columns=('age', 'sex', 'trestbps', 'chol', 'fbs', 'thalach', 'exang', 'oldpeak'),
    label_values=('0', '1'),
)

#: The iris CSV layout.
IRIS_SCHEMA = CsvSchema(
    label='species',
    columns=('sepal_length', 'sepal_width', 'petal_length', 'petal_width'),
    label_values=('setosa', 'versicolor', 'virginica'),
)


def _label_order(values: pd.Series) -> Tuple[str, ...]:
    unique = values.unique().tolist()
    numeric = pd.to_numeric(pd.Series(unique), errors='coerce')
    if not numeric.isna().any():
        return tuple(v for _, v in sorted(zip(numeric, unique)))
    return tuple(sorted(unique))


def load_csv(path: PathType, schema: CsvSchema, name: Optional[str] = None) -> Dataset:
    """Parse a CSV file with a header row into a :class:`Dataset`.

    Line numbers in error messages are 1-based and count the header as line 1.

    Parameters
    ----------
    path : :class:`str` or :class:`os.PathLike`
        The CSV file.

    schema : :class:`CsvSchema`
        The column layout.

    name : :class:`str`, optional
        The dataset name; defaults to the file name without extension.

    Raises
    ------
    DataFormatError
        Raised for ragged rows, unparseable or non-finite fields, unknown labels and
        missing columns.

    """
    filename = os.fspath(path)
    if name is None:
        name = os.path.splitext(os.path.basename(filename))[0]

    try:
        df = pd.read_csv(filename, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as ex:
        raise DataFormatError(f"{filename!r}: empty file") from ex
    except pd.errors.ParserError as ex:
        raise DataFormatError(f"{filename!r}: {ex}") from ex

    ragged = df.isna().any(axis=1).to_numpy()
    if ragged.any():
        line = int(np.flatnonzero(ragged)[0]) + 2
        raise DataFormatError(f"{filename!r}, line {line}: expected {df.shape[1]} fields")

    columns = schema.columns
    if columns is None:
        columns = tuple(c for c in df.columns if c != schema.label and c not in schema.categorical)
    missing = [c for c in (schema.label, *schema.categorical, *columns) if c not in df.columns]
    if missing:
        raise DataFormatError(f"{filename!r}: missing column(s) {missing!r}")

    numeric = {}
    for col in columns:
        values = pd.to_numeric(df[col], errors='coerce')
        bad = (values.isna() | ~np.isfinite(values.fillna(0))).to_numpy()
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataFormatError(f"{filename!r}, line {i + 2}: column {col!r} holds a "
                                  f"non-numeric or non-finite value {df[col].iat[i]!r}")
        numeric[col] = values.astype(np.float64)

    parts = [pd.DataFrame(numeric, index=df.index)]
    if schema.categorical:
        parts.append(pd.get_dummies(df[list(schema.categorical)], dtype=np.float64))
    features = pd.concat(parts, axis=1)

    labels_str = df[schema.label].str.strip()
    order = schema.label_values or _label_order(labels_str)
    mapping = {v: i for i, v in enumerate(order)}
    labels = labels_str.map(mapping)
    if labels.isna().any():
        i = int(np.flatnonzero(labels.isna().to_numpy())[0])
        raise DataFormatError(f"{filename!r}, line {i + 2}: unknown label {labels_str.iat[i]!r}; "
                              f"expected one of {list(order)!r}")

    ret = Dataset(features.to_numpy(), labels.to_numpy(dtype=np.int64), len(order), name,
                  tuple(str(c) for c in features.columns))
    logger.info("Loaded %r from %r: N=%d, n=%d, c=%d",
                name, filename, len(ret), ret.n_features, ret.n_classes)
    return ret


def load_iris(path: Optional[PathType] = None) -> Dataset:
    """Return the iris dataset (N=150, n=4, c=3), from **path** or from :mod:`sklearn.datasets`."""
    if path is not None:
        ret = load_csv(path, IRIS_SCHEMA, name='iris')
    else:
        bunch = sk_datasets.load_iris()
        ret = Dataset(bunch.data, bunch.target, 3, 'iris', tuple(bunch.feature_names))
    if ret.features.shape != (150, 4):
        raise DataFormatError(f"iris: expected 150 samples with 4 features; "
                              f"observed shape {ret.features.shape}")
    return ret


def _gen_shells(dim: int, n_samples: int, radii: Sequence[float], noise_sd: float,
                seed: Optional[int], name: str) -> Dataset:
    if n_samples < 2:
        raise ValueError(f"'n_samples' expected at least 2; observed {n_samples!r}")
    elif len(radii) < 2:
        raise ValueError(f"'radii' expected at least two radii; observed {radii!r}")
    rng = np.random.default_rng(seed)
    shell_radii = np.asarray(radii, dtype=np.float64)
    counts = (n_samples // 2, n_samples - n_samples // 2)

    features = []
    labels = []
    for label, count in enumerate(counts):
        # Shell k carries label k % 2
        shells = np.arange(label, len(shell_radii), 2)
        radius = shell_radii[rng.choice(shells, size=(count, 1))]
        direction = rng.normal(size=(count, dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = radius + rng.normal(0.0, noise_sd, size=(count, 1))
        features.append(direction * r)
        labels.append(np.full(count, label))

    perm = rng.permutation(n_samples)
    return Dataset(np.concatenate(features)[perm], np.concatenate(labels)[perm], 2, name)


def gen_circles(n_samples: int = 2000, radii: Sequence[float] = SHELL_RADII,
                noise_sd: float = SHELL_NOISE_SD, seed: Optional[int] = 42) -> Dataset:
    """Generate 2-D points on concentric circles; circle *k* carries label ``k % 2``.

    Both labels hold half of the **n_samples** points,
    spread uniformly over the circles of that label.

    """
    return _gen_shells(2, n_samples, radii, noise_sd, seed, 'circles')


def gen_spheres(n_samples: int = 2000, radii: Sequence[float] = SHELL_RADII,
                noise_sd: float = SHELL_NOISE_SD, seed: Optional[int] = 42) -> Dataset:
    """Generate 3-D points on concentric spheres; sphere *k* carries label ``k % 2``."""
    return _gen_shells(3, n_samples, radii, noise_sd, seed, 'spheres')


def _read_idx(path: PathType, magic: int, ndim: int) -> np.ndarray:
    filename = os.fspath(path)
    with open(filename, 'rb') as f:
        content = f.read()
    if content[:2] == b'\x1f\x8b':
        content = gzip.decompress(content)

    header_size = 4 * (1 + ndim)
    if len(content) < header_size:
        raise DataFormatError(f"{filename!r}: truncated IDX header")
    header = np.frombuffer(content, dtype='>u4', count=1 + ndim)
    if header[0] != magic:
        raise DataFormatError(f"{filename!r}: bad magic number {int(header[0]):#010x}; "
                              f"expected {magic:#010x}")

    shape = tuple(int(i) for i in header[1:])
    size = int(np.prod(shape, dtype=np.int64))
    if len(content) - header_size < size:
        raise DataFormatError(f"{filename!r}: truncated IDX data; expected {size} bytes "
                              f"for shape {shape}, observed {len(content) - header_size}")
    return np.frombuffer(content, dtype=np.uint8, count=size, offset=header_size).reshape(shape)


def load_fashion_mnist(images_path: PathType, labels_path: PathType,
                       name: str = 'fashion') -> Dataset:
    """Read a pair of FashionMNIST IDX files into a dataset with ``N x 784`` features in ``[0, 1]``.

    Gzip-compressed files are detected by their magic bytes.

    Raises
    ------
    DataFormatError
        Raised for bad magic numbers, truncated files or mismatching sample counts.

    """
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise DataFormatError(f"{os.fspath(images_path)!r} holds {len(images)} images but "
                              f"{os.fspath(labels_path)!r} holds {len(labels)} labels")
    features = images.reshape(len(images), -1).astype(np.float32) / 255
    ret = Dataset(features, labels, 10, name)
    logger.info("Loaded %r: N=%d, n=%d, c=%d", name, len(ret), ret.n_features, ret.n_classes)
    return ret


def _find_file(directory: str, stem: str) -> str:
    for suffix in ('', '.gz'):
        filename = os.path.join(directory, stem + suffix)
        if os.path.isfile(filename):
            return filename
    raise ConfigError(f"no file {stem!r} (optionally gzip-compressed) in {directory!r}")


def train_test_split(ds: Dataset, test_fraction: float = 0.2,
                     seed: Optional[int] = 42) -> Tuple[Dataset, Dataset]:
    """Split **ds** into disjoint, stratified train and test sets.

    The split is deterministic for a given **seed**.

    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"'test_fraction' expected a value in (0, 1); observed {test_fraction!r}")
    index = np.arange(len(ds))
    train_idx, test_idx = model_selection.train_test_split(
        index, test_size=test_fraction, random_state=seed, stratify=ds.labels
    )
    return ds.subset(np.sort(train_idx)), ds.subset(np.sort(test_idx))


def standardize(train: Dataset, test: Dataset,
                center: bool = True) -> Tuple[Dataset, Dataset, StandardScaler]:
    """Scale both sets to zero mean and unit variance per feature using statistics of **train**.

    If **center** is ``False`` the features are only divided by their standard deviation.
    Constant features are mapped to zero when centered and left unchanged otherwise.

    """
    scaler = StandardScaler(with_mean=center).fit(train.features)

    def transform(ds: Dataset) -> Dataset:
        features = scaler.transform(ds.features).astype(ds.features.dtype, copy=False)
        return Dataset(features, ds.labels, ds.n_classes, ds.name, ds.feature_names)
    return transform(train), transform(test), scaler


def concat_datasets(*datasets: Dataset) -> Dataset:
    """Concatenate the rows of several datasets with identical feature layouts."""
    if not datasets:
        raise TypeError("concat_datasets() requires at least one dataset")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.n_features != first.n_features or ds.n_classes != first.n_classes:
            raise ValueError(f"cannot concatenate {ds.name!r} with {first.name!r}: "
                             f"mismatching features or classes")
    return Dataset(np.concatenate([ds.features for ds in datasets]),
                   np.concatenate([ds.labels for ds in datasets]),
                   first.n_classes, first.name, first.feature_names)


def to_csv(ds: Dataset, path: PathType) -> None:
    """Write **ds** to a CSV file with one column per feature and a final ``label`` column."""
    names = ds.feature_names or tuple(f'x{i}' for i in range(ds.n_features))
    df = pd.DataFrame(ds.features, columns=list(names))
    df['label'] = ds.labels
    df.to_csv(path, index=False)
    logger.info("Wrote %d rows of %r to %r", len(ds), ds.name, os.fspath(path))


def load_split(name: str, data_path: Optional[PathType] = None, test_fraction: float = 0.2,
               seed: int = 42) -> Tuple[Dataset, Dataset]:
    """Load, split and preprocess one of the :data:`DATASETS` and return ``(train, test)``.

    * ``"iris"``: :func:`load_iris`, from **data_path** if given.
    * ``"heart"``: :func:`load_csv` with :data:`HEART_SCHEMA`; **data_path** is required.
    * ``"circles"`` and ``"spheres"``: generated with **seed**.
    * ``"fashion"``: the canonical train and test IDX files in the directory **data_path**;
      features are kept in ``[0, 1]``.

    The tabular sets are split with :func:`train_test_split` and standardized
    with :func:`standardize`;
    the :data:`UNCENTERED_DATASETS` are scaled without centering.

    Raises
    ------
    ConfigError
        Raised for unknown dataset names or a missing **data_path**.

    """
    if name not in DATASETS:
        raise ConfigError(f"'dataset' expected one of {list(DATASETS)!r}; observed {name!r}")
    elif name in ('heart', 'fashion') and data_path is None:
        raise ConfigError(f"dataset {name!r} requires 'data_path'")
    if data_path is not None:
        data_path = os.path.expanduser(os.fspath(data_path))

    if name == 'fashion':
        directory = os.fspath(data_path)  # type: ignore[arg-type]
        train = load_fashion_mnist(_find_file(directory, 'train-images-idx3-ubyte'),
                                   _find_file(directory, 'train-labels-idx1-ubyte'))
        test = load_fashion_mnist(_find_file(directory, 't10k-images-idx3-ubyte'),
                                  _find_file(directory, 't10k-labels-idx1-ubyte'))
        return train, test

    ds: Dataset
    if name == 'iris':
        ds = load_iris(data_path)
    elif name == 'heart':
        ds = load_csv(data_path, HEART_SCHEMA, name='heart')  # type: ignore[arg-type]
    elif name == 'circles':
        ds = gen_circles(seed=seed)
    else:
        ds = gen_spheres(seed=seed)

    train, test = train_test_split(ds, test_fraction, seed)
    train, test, _ = standardize(train, test, center=name not in UNCENTERED_DATASETS)
    logger.info("Split %r into %d training and %d test samples", name, len(train), len(test))
    return train, test

