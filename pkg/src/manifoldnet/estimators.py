"""Scikit-learn style estimators wrapping the geometric networks.

GrassmannSubspaceRegressor maps input vectors to subspaces, either by
direct basis regression (baseline) or through tangent coordinates at a
pole followed by the exponential map. SphereClassifier trains one of the
six classification variants (softmax baseline, two on-sphere losses,
three tangent-space losses).
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import sphere
from .exceptions import InvalidConfig
from .grassmann import (
    GrassPole,
    frechet_mean,
    geodesic_distance,
    grassmann_exp,
    grassmann_log,
    subspace_from_span,
)
from .linalg import svd_thin
from .network import LossSpec, Network, SphereNormalize, TangentProject, train


class GrassmannSubspaceRegressor(BaseEstimator, RegressorMixin):
    """Regress from vectors to d-dimensional subspaces of R^n.

    framework='tangent' trains against tangent coordinates at a pole
    ('frechet' mean of the training subspaces or 'train_pca', the
    dominant subspace of the pooled training inputs) and maps outputs
    through the exponential map. framework='baseline' regresses the raw
    basis matrix and orthonormalizes the output.
    """

    def __init__(
        self,
        d=5,
        framework="tangent",
        pole="frechet",
        hidden=(128,),
        lr=1e-3,
        batch_size=30,
        iterations=3000,
        seed=0,
    ):
        self.d = d
        self.framework = framework
        self.pole = pole
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.iterations = iterations
        self.seed = seed

    def fit(self, X, y):
        """X: (N, n) inputs; y: (N, n, d) orthonormal bases (ground truth)."""
        X = check_array(X)
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 3 or y.shape[2] != self.d or y.shape[0] != X.shape[0]:
            raise InvalidConfig("y must be (N, n, d) bases matching X")
        n = y.shape[1]
        self.n_ = n

        if self.framework == "tangent":
            self.pole_ = self._compute_pole(X, y)
            targets = np.stack(
                [grassmann_log(self.pole_, y[i]).reshape(-1) for i in range(len(y))]
            )
            out_dim = (n - self.d) * self.d
            kind = "tangent_coords"
        elif self.framework == "baseline":
            self.pole_ = None
            targets = y.reshape(len(y), -1)
            out_dim = n * self.d
            kind = "baseline_basis"
        else:
            raise InvalidConfig(f"unknown framework {self.framework!r}")

        sizes = [X.shape[1], *self.hidden, out_dim]
        self.net_ = Network.mlp(sizes, seed=self.seed)
        self.loss_curve_ = train(
            self.net_,
            X,
            targets,
            LossSpec(kind),
            iterations=self.iterations,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed + 1,
        )
        return self

    def _compute_pole(self, X, y):
        if self.pole == "frechet":
            # unique subspaces only: y repeats per-subject bases bitwise
            seen = {}
            for i in range(len(y)):
                seen.setdefault(y[i].tobytes(), y[i])
            return frechet_mean(list(seen.values()))
        if self.pole == "train_pca":
            res = svd_thin(X)  # right singular vectors span the input space
            return GrassPole.from_basis(res.vt[: self.d].T)
        raise InvalidConfig(f"unknown pole choice {self.pole!r}")

    def predict(self, X):
        """Return one orthonormal (n, d) basis per input row."""
        check_is_fitted(self, "net_")
        X = check_array(X)
        raw = self.net_.forward(X)
        out = []
        for row in raw:
            if self.framework == "tangent":
                a = row.reshape(self.n_ - self.d, self.d)
                out.append(grassmann_exp(self.pole_, a))
            else:
                out.append(subspace_from_span(row.reshape(self.n_, self.d)))
        return np.stack(out)

    def distances(self, X, y):
        """Geodesic distance between each prediction and its true subspace."""
        preds = self.predict(X)
        return np.array([geodesic_distance(p, t) for p, t in zip(preds, y)])

    def score(self, X, y):
        return -float(np.mean(self.distances(X, y)))


_CLASSIFY_LOSSES = (
    "cross_entropy",
    "sphere_euclidean",
    "sphere_geodesic",
    "tangent_euclidean",
    "tangent_orthogonal",
    "tangent_projection",
)


class SphereClassifier(BaseEstimator, ClassifierMixin):
    """Multi-class classifier trained with a geometry-aware loss.

    Predictions always go through the probability simplex: softmax for
    the cross-entropy baseline, squared sphere coordinates for the
    on-sphere variants, and project -> exp map -> square for the
    tangent-space variants.
    """

    def __init__(
        self,
        loss="sphere_geodesic",
        hidden=(64,),
        lr=1e-3,
        batch_size=100,
        iterations=5000,
        lam=1.0,
        seed=0,
    ):
        self.loss = loss
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.iterations = iterations
        self.lam = lam
        self.seed = seed

    def fit(self, X, y):
        X = check_array(X)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        c = len(self.classes_)
        self.n_classes_ = c
        labels = np.searchsorted(self.classes_, y)
        if self.loss not in _CLASSIFY_LOSSES:
            raise InvalidConfig(f"unknown loss {self.loss!r}")

        pole = sphere.uniform_pole(c)
        self.pole_ = pole
        from .datasets import make_classification_targets

        if self.loss == "cross_entropy":
            targets = make_classification_targets(labels, c, "pdf")
            final = None
            spec = LossSpec("cross_entropy")
        elif self.loss in ("sphere_euclidean", "sphere_geodesic"):
            targets = make_classification_targets(labels, c, "sphere")
            final = SphereNormalize()
            spec = LossSpec(self.loss)
        else:
            targets = make_classification_targets(labels, c, "tangent")
            final = TangentProject(pole) if self.loss == "tangent_projection" else None
            spec = LossSpec(self.loss, pole=pole, lam=self.lam)

        sizes = [X.shape[1], *self.hidden, c]
        self.net_ = Network.mlp(sizes, seed=self.seed, final_layer=final)
        self.loss_curve_ = train(
            self.net_,
            X,
            targets,
            spec,
            iterations=self.iterations,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed + 1,
            assert_constraints=final is not None,
        )
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "net_")
        X = check_array(X)
        raw = self.net_.forward(X)
        if self.loss == "cross_entropy":
            z = raw - raw.max(axis=1, keepdims=True)
            e = np.exp(z)
            return e / e.sum(axis=1, keepdims=True)
        if self.loss in ("sphere_euclidean", "sphere_geodesic"):
            unit = raw / np.linalg.norm(raw, axis=1, keepdims=True)
            return unit**2
        probs = np.empty_like(raw)
        for i, row in enumerate(raw):
            xi = sphere.project_to_tangent(self.pole_, row)
            probs[i] = sphere.sphere_exp(self.pole_, xi) ** 2
        return probs

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
