"""Tests for :mod:`semiringlib.data`."""

import gzip
from os.path import join

import numpy as np
import pandas as pd
from assertionlib import assertion
from nanoutils import delete_finally

from semiringlib.exceptions import ConfigError, DataFormatError
from semiringlib.data import (
    Dataset, CsvSchema, HEART_SCHEMA, IRIS_SCHEMA, load_csv, load_iris, gen_circles, gen_spheres,
    load_fashion_mnist, train_test_split, standardize, concat_datasets, to_csv, load_split
)

PATH = join('tests', 'test_files')
HEART = join(PATH, 'heart.csv')
TMP_CSV = join(PATH, 'tmp.csv')


def _write(filename: str, content: str) -> None:
    with open(filename, 'w') as f:
        f.write(content)


def test_dataset() -> None:
    """Tests for :class:`Dataset`."""
    ds = Dataset([[1, 2], [3, 4], [5, 6]], [0, 1, 1], 2, 'toy')
    assertion.eq(ds.features.dtype, np.float64)
    assertion.eq(ds.labels.dtype, np.int64)
    assertion.len_eq(ds, 3)
    assertion.eq(ds.n_features, 2)
    assertion.eq(ds.subset(np.array([2, 0])).labels.tolist(), [1, 0])
    assertion.eq(ds.astype(np.float32).features.dtype, np.float32)

    assertion.assert_(Dataset, [[np.nan, 1.0]], [0], 2, exception=DataFormatError)
    assertion.assert_(Dataset, [[0.0, 1.0]], [2], 2, exception=DataFormatError)
    assertion.assert_(Dataset, [[0.0, 1.0]], [0, 1], 2, exception=DataFormatError)
    assertion.assert_(Dataset, [0.0, 1.0], [0, 1], 2, exception=DataFormatError)


def test_load_csv() -> None:
    """Tests for :func:`load_csv`."""
    ds = load_csv(HEART, HEART_SCHEMA)
    assertion.eq(ds.name, 'heart')
    assertion.len_eq(ds, 10)
    assertion.eq(ds.n_classes, 2)
    assertion.eq(ds.labels.tolist(), [1] * 5 + [0] * 5)

    # 8 numeric columns and the one-hot encoded categorical columns
    assertion.eq(ds.n_features, 8 + 4 + 2 + 3 + 4 + 3)
    assertion.eq(ds.feature_names[:2], ('age', 'sex'))
    assertion.contains(ds.feature_names, 'thal_3')
    assertion.eq(ds.features[:, ds.feature_names.index('cp_3')].sum(), 1.0)


@delete_finally(TMP_CSV)
def test_load_csv_schema() -> None:
    """Tests for :func:`load_csv` with implicit columns and label order."""
    _write(TMP_CSV, 'a,b,y\n1.5,2,dog\n3,4,cat\n5,6,dog\n')
    ds = load_csv(TMP_CSV, CsvSchema(label='y'), name='pets')
    assertion.eq(ds.name, 'pets')
    assertion.eq(ds.feature_names, ('a', 'b'))
    assertion.eq(ds.labels.tolist(), [1, 0, 1])
    assertion.eq(ds.features.tolist(), [[1.5, 2.0], [3.0, 4.0], [5.0, 6.0]])


@delete_finally(TMP_CSV)
def test_load_csv_invalid() -> None:
    """Test that :func:`load_csv` reports malformed files with their line numbers."""
    schema = CsvSchema(label='y', columns=('a', 'b'), label_values=('0', '1'))
    invalid = {
        'a,b,y\n1,2,0\n3,4\n': 'line 3',
        'a,b,y\n1,2,0\n3,x,1\n': 'line 3',
        'a,b,y\n1,inf,0\n': 'line 2',
        'a,b,y\n1,2,0\n1,2,5\n': 'line 3',
        'a,y\n1,0\n': 'missing column',
        '': 'empty file',
    }
    for content, msg in invalid.items():
        _write(TMP_CSV, content)
        try:
            load_csv(TMP_CSV, schema)
        except DataFormatError as ex:
            assertion.contains(str(ex), msg)
        else:
            raise AssertionError(f"Failed to raise a DataFormatError for {content!r}")


def test_load_iris() -> None:
    """Tests for :func:`load_iris`."""
    ds = load_iris()
    assertion.eq(ds.features.shape, (150, 4))
    assertion.eq(ds.n_classes, 3)
    assertion.eq(np.bincount(ds.labels).tolist(), [50, 50, 50])
    assertion.eq(IRIS_SCHEMA.label_values, ('setosa', 'versicolor', 'virginica'))


def test_gen_shells() -> None:
    """Tests for :func:`gen_circles` and :func:`gen_spheres`."""
    circles = gen_circles(1000, noise_sd=0.0, seed=0)
    assertion.eq(circles.name, 'circles')
    assertion.eq(circles.features.shape, (1000, 2))
    assertion.eq(np.bincount(circles.labels).tolist(), [500, 500])
    radius = np.linalg.norm(circles.features, axis=1)
    for label, ref in [(0, [1.0, 2.0]), (1, [1.5, 2.5])]:
        shells = np.round(radius[circles.labels == label], 12)
        assertion.eq(sorted(set(shells.tolist())), ref)

    # Two radii give one shell per label
    circles = gen_circles(100, radii=(1.0, 2.0), noise_sd=0.0, seed=0)
    radius = np.linalg.norm(circles.features, axis=1)
    assertion.assert_(np.allclose, radius, circles.labels + 1.0)

    spheres = gen_spheres(501, radii=(1.0, 3.0), seed=1)
    assertion.eq(spheres.features.shape, (501, 3))
    assertion.eq(np.bincount(spheres.labels).tolist(), [250, 251])
    radius = np.linalg.norm(spheres.features, axis=1)
    assertion.lt(abs(radius[spheres.labels == 1].mean() - 3.0), 0.05)

    # Deterministic per seed
    assertion.eq(gen_circles(10, seed=5).features.tolist(),
                 gen_circles(10, seed=5).features.tolist())

    assertion.assert_(gen_circles, 1, exception=ValueError)
    assertion.assert_(gen_spheres, 10, radii=(1.0,), exception=ValueError)


def test_split() -> None:
    """Tests for :func:`train_test_split` and :func:`standardize`."""
    ds = gen_spheres(200, seed=2)
    train, test = train_test_split(ds, 0.2, seed=42)
    assertion.eq((len(train), len(test)), (160, 40))
    assertion.eq(np.bincount(test.labels).tolist(), [20, 20])

    # Disjoint and exhaustive
    rows = np.concatenate([train.features, test.features])
    assertion.eq(len({tuple(r) for r in rows}), 200)

    train2, test2 = train_test_split(ds, 0.2, seed=42)
    assertion.eq(test.features.tolist(), test2.features.tolist())
    assertion.assert_(train_test_split, ds, 1.0, exception=ValueError)

    train_s, test_s, scaler = standardize(train, test)
    assertion.assert_(np.allclose, train_s.features.mean(axis=0), 0.0)
    assertion.assert_(np.allclose, train_s.features.std(axis=0), 1.0)
    assertion.assert_(np.allclose, test_s.features, scaler.transform(test.features))


def test_standardize_constant() -> None:
    """Test that :func:`standardize` maps constant features to zero."""
    ds = Dataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]), [0, 1, 0], 2)
    train, _, _ = standardize(ds, ds)
    assertion.eq(train.features[:, 1].tolist(), [0.0, 0.0, 0.0])


def test_standardize_uncentered() -> None:
    """Test that :func:`standardize` can scale without centering."""
    train = Dataset(np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]), [0, 1, 0], 2)
    test = Dataset(np.array([[4.0, 5.0]]), [1], 2)
    train2, test2, _ = standardize(train, test, center=False)
    sd = np.sqrt(2 / 3)
    assertion.assert_(np.allclose, train2.features[:, 0], [1 / sd, 2 / sd, 3 / sd])
    assertion.assert_(np.allclose, test2.features[0], [4 / sd, 5.0])


def test_concat_datasets() -> None:
    """Tests for :func:`concat_datasets`."""
    a = gen_circles(10, seed=0)
    b = gen_circles(6, seed=1)
    assertion.len_eq(concat_datasets(a, b), 16)
    assertion.assert_(concat_datasets, a, gen_spheres(10), exception=ValueError)
    assertion.assert_(concat_datasets, exception=TypeError)


@delete_finally(TMP_CSV)
def test_to_csv() -> None:
    """Tests for :func:`to_csv`."""
    ds = gen_circles(20, seed=3)
    to_csv(ds, TMP_CSV)
    df = pd.read_csv(TMP_CSV)
    assertion.eq(df.columns.tolist(), ['x0', 'x1', 'label'])
    assertion.assert_(np.allclose, df[['x0', 'x1']].to_numpy(), ds.features)

    ds2 = load_csv(TMP_CSV, CsvSchema(label='label'))
    assertion.eq(ds2.labels.tolist(), ds.labels.tolist())


def _idx_bytes(magic: int, array: np.ndarray) -> bytes:
    header = np.array([magic, *array.shape], dtype='>u4').tobytes()
    return header + array.astype(np.uint8).tobytes()


@delete_finally(join(PATH, 'images.gz'), join(PATH, 'labels'))
def test_load_fashion_mnist() -> None:
    """Tests for :func:`load_fashion_mnist`."""
    images_file = join(PATH, 'images.gz')
    labels_file = join(PATH, 'labels')
    images = np.arange(3 * 28 * 28).reshape(3, 28, 28) % 256
    with open(images_file, 'wb') as f:
        f.write(gzip.compress(_idx_bytes(0x00000803, images)))
    with open(labels_file, 'wb') as f:
        f.write(_idx_bytes(0x00000801, np.array([9, 0, 4])))

    ds = load_fashion_mnist(images_file, labels_file)
    assertion.eq(ds.features.shape, (3, 784))
    assertion.eq(ds.features.dtype, np.float32)
    assertion.eq(ds.labels.tolist(), [9, 0, 4])
    assertion.le(ds.features.max(), 1.0)
    assertion.isclose(ds.features[0, 255], 1.0)

    # Bad magic number, swapped files and truncated data
    assertion.assert_(load_fashion_mnist, labels_file, images_file, exception=DataFormatError)
    with open(labels_file, 'wb') as f:
        f.write(_idx_bytes(0x00000801, np.array([9, 0, 4]))[:-1])
    assertion.assert_(load_fashion_mnist, images_file, labels_file, exception=DataFormatError)
    with open(labels_file, 'wb') as f:
        f.write(_idx_bytes(0x00000801, np.array([9, 0])))
    assertion.assert_(load_fashion_mnist, images_file, labels_file, exception=DataFormatError)


def test_load_split() -> None:
    """Tests for :func:`load_split`."""
    train, test = load_split('iris')
    assertion.eq((len(train), len(test)), (120, 30))
    assertion.assert_(np.allclose, train.features.std(axis=0), 1.0)
    assertion.assert_(np.all, train.features.mean(axis=0) > 1.0)

    train, test = load_split('heart', HEART, test_fraction=0.2)
    assertion.eq((len(train), len(test)), (8, 2))
    assertion.eq(train.n_features, 24)

    train, _ = load_split('circles', seed=1)
    assertion.eq(train.n_features, 2)
    assertion.assert_(np.allclose, train.features.mean(axis=0), 0.0)

    assertion.assert_(load_split, 'mnist', exception=ConfigError)
    assertion.assert_(load_split, 'heart', exception=ConfigError)
    assertion.assert_(load_split, 'fashion', exception=ConfigError)
    assertion.assert_(load_split, 'fashion', PATH, exception=ConfigError)
