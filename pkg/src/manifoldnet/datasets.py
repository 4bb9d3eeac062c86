"""Dataset generation and loading.

Covers the synthetic subspace-regression set (subject-specific subspaces
observed through shared coefficient patterns, with per-subject sign and
permutation corruption of the presented basis), IDX-format image
loading, synthetic Gaussian clusters, and target encoders for each
output geometry.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import sphere
from .exceptions import (
    BadMagic,
    CountMismatch,
    InvalidConfig,
    LabelOutOfRange,
    TruncatedFile,
)
from .grassmann import GrassPole, grassmann_exp, grassmann_log, subspace_from_span

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
F2IS_FORMAT_VERSION = "f2is-v1"


@dataclass
class SubjectRecord:
    true_subspace: np.ndarray  # n x d orthonormal
    presented_basis: np.ndarray  # n x d, sign/permutation corrupted
    inputs: np.ndarray  # L x n


@dataclass
class SubspaceRegressionSet:
    n: int
    d: int
    subjects: list
    train_ids: list
    test_ids: list

    def stacked_inputs(self, ids):
        return np.concatenate([self.subjects[i].inputs for i in ids], axis=0)


@dataclass
class ClassificationSet:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    source: str = "synthetic_gaussian"


def generate_f2is(
    seed=0,
    n_subjects=60,
    n=64,
    d=5,
    samples_per_subject=16,
    noise=0.05,
    spread=0.7,
    latent_dim=4,
    train_fraction=0.8,
):
    """Synthetic subspace-regression data.

    Subject subspaces are tangent perturbations of a common base
    subspace, driven by a low-dimensional latent so that unseen test
    subjects remain predictable from their inputs. Inputs are subspace
    vectors from shared coefficient patterns plus per-subject jitter and
    additive noise. The presented basis carries the per-subject sign and
    permutation ambiguity that makes direct basis regression ill-posed.
    """
    if n_subjects < 10:
        raise InvalidConfig("need at least 10 subjects")
    if samples_per_subject < d + 2:
        raise InvalidConfig("need at least d + 2 samples per subject")
    if noise < 0 or spread < 0:
        raise InvalidConfig("noise and spread must be nonnegative")

    rng = np.random.default_rng(seed)
    base = GrassPole.from_basis(subspace_from_span(rng.standard_normal((n, d))))

    # latent-to-tangent dictionary, unit Frobenius norm per atom
    atoms = rng.standard_normal((latent_dim, n - d, d))
    atoms /= np.linalg.norm(atoms.reshape(latent_dim, -1), axis=1)[:, None, None]

    coeffs = rng.standard_normal((samples_per_subject, d))  # shared patterns

    subjects = []
    for _ in range(n_subjects):
        z = rng.standard_normal(latent_dim)
        a = np.tensordot(z, atoms, axes=1)
        norm = np.linalg.norm(a)
        if spread == 0.0 or norm == 0.0:
            u = base.basis.copy()
        else:
            # spread sets the mean distance from the base subspace
            radius = spread * abs(rng.standard_normal() * 0.25 + 1.0)
            u = grassmann_exp(base, a * (radius / norm))

        perm = rng.permutation(d)
        signs = rng.choice([-1.0, 1.0], size=d)
        presented = (u * signs)[:, perm]

        jitter = 0.05 * rng.standard_normal(coeffs.shape)
        x = (coeffs + jitter) @ u.T + noise * rng.standard_normal(
            (samples_per_subject, n)
        )
        subjects.append(SubjectRecord(u, presented, x))

    n_train = int(round(train_fraction * n_subjects))
    ids = list(range(n_subjects))
    return SubspaceRegressionSet(
        n=n, d=d, subjects=subjects, train_ids=ids[:n_train], test_ids=ids[n_train:]
    )


def encode_targets(dataset: SubspaceRegressionSet, pole: GrassPole):
    """Tangent-coordinate targets, one (n-d) x d matrix per subject."""
    return [grassmann_log(pole, s.true_subspace) for s in dataset.subjects]


def _read_idx_header(data, path, expect_magic, n_dims):
    if len(data) < 4 * (1 + n_dims):
        raise TruncatedFile(f"{path}: header truncated")
    magic = struct.unpack(">i", data[:4])[0]
    if magic != expect_magic:
        raise BadMagic(f"{path}: magic {magic}, expected {expect_magic}")
    dims = struct.unpack(f">{n_dims}i", data[4 : 4 + 4 * n_dims])
    return dims, data[4 + 4 * n_dims :]


def load_idx(images_path, labels_path) -> ClassificationSet:
    """Load an IDX image/label file pair; pixels scaled to [0, 1]."""
    with open(images_path, "rb") as f:
        img_data = f.read()
    with open(labels_path, "rb") as f:
        lbl_data = f.read()

    (n_img, rows, cols), pixels = _read_idx_header(
        img_data, images_path, IDX_IMAGE_MAGIC, 3
    )
    (n_lbl,), raw_labels = _read_idx_header(lbl_data, labels_path, IDX_LABEL_MAGIC, 1)
    if len(pixels) < n_img * rows * cols:
        raise TruncatedFile(f"{images_path}: pixel payload truncated")
    if len(raw_labels) < n_lbl:
        raise TruncatedFile(f"{labels_path}: label payload truncated")
    if n_img != n_lbl:
        raise CountMismatch(f"{n_img} images vs {n_lbl} labels")

    images = np.frombuffer(pixels[: n_img * rows * cols], dtype=np.uint8)
    images = images.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(raw_labels[:n_lbl], dtype=np.uint8).astype(np.int64)
    return ClassificationSet(
        inputs=images,
        labels=labels,
        n_classes=int(labels.max()) + 1,
        source="idx_files",
    )


def write_idx(images, labels, images_path, labels_path, shape=None):
    """Write images (N x P floats in [0,1]) and labels as an IDX pair."""
    images = np.asarray(images)
    n = images.shape[0]
    if shape is None:
        side = int(round(np.sqrt(images.shape[1])))
        shape = (side, side)
    pixels = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">iiii", IDX_IMAGE_MAGIC, n, shape[0], shape[1]))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">ii", IDX_LABEL_MAGIC, n))
        f.write(np.asarray(labels, dtype=np.uint8).tobytes())


def make_classification_targets(labels, n_classes, framework):
    """Per-sample targets for the chosen output geometry.

    framework: 'pdf' (one-hot), 'sphere' (square-root of one-hot, i.e.
    basis vectors), or 'tangent' (log of the basis vector at the uniform
    pole; all classes sit at equal distance acos(1/sqrt(C))).
    """
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise LabelOutOfRange("label outside [0, n_classes)")
    onehot = np.eye(n_classes)[labels]
    if framework == "pdf":
        return onehot
    if framework == "sphere":
        return onehot  # sqrt of one-hot is the basis vector itself
    if framework == "tangent":
        pole = sphere.uniform_pole(n_classes)
        per_class = np.stack(
            [sphere.sphere_log(pole, np.eye(n_classes)[k]) for k in range(n_classes)]
        )
        return per_class[labels]
    raise InvalidConfig(f"unknown target framework {framework!r}")


def synthetic_gaussian_classes(seed, n_classes, dim, per_class, spread):
    """Gaussian clusters around unit-norm random means."""
    if n_classes < 2:
        raise InvalidConfig("need at least 2 classes")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    xs, ys = [], []
    for c in range(n_classes):
        xs.append(means[c] + spread * rng.standard_normal((per_class, dim)))
        ys.append(np.full(per_class, c, dtype=np.int64))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(len(y))
    return ClassificationSet(inputs=x[order], labels=y[order], n_classes=n_classes)


def save_f2is(dataset: SubspaceRegressionSet, path):
    """Serialize to npz with a version marker."""
    payload = {
        "version": np.array(F2IS_FORMAT_VERSION),
        "n": np.array(dataset.n),
        "d": np.array(dataset.d),
        "train_ids": np.array(dataset.train_ids),
        "test_ids": np.array(dataset.test_ids),
    }
    for i, s in enumerate(dataset.subjects):
        payload[f"true_{i}"] = s.true_subspace
        payload[f"presented_{i}"] = s.presented_basis
        payload[f"inputs_{i}"] = s.inputs
    np.savez(path, **payload)


def load_f2is(path) -> SubspaceRegressionSet:
    data = np.load(path)
    if str(data["version"]) != F2IS_FORMAT_VERSION:
        raise BadMagic(f"unsupported container version {data['version']}")
    subjects = []
    i = 0
    while f"true_{i}" in data:
        subjects.append(
            SubjectRecord(data[f"true_{i}"], data[f"presented_{i}"], data[f"inputs_{i}"])
        )
        i += 1
    return SubspaceRegressionSet(
        n=int(data["n"]),
        d=int(data["d"]),
        subjects=subjects,
        train_ids=list(data["train_ids"]),
        test_ids=list(data["test_ids"]),
    )
