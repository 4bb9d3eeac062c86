"""Experiment runners: subspace regression, classification, geometry checks.

Each runner takes a flat config dict, trains the relevant estimator, and
returns a metrics record: reproducibility-relevant scalars live under
'scalars' (bitwise comparable across deterministic reruns), while
wall-clock and curves sit alongside.
"""

import os
import time

import numpy as np

from . import sphere
from .datasets import (
    generate_f2is,
    load_idx,
    make_classification_targets,
    synthetic_gaussian_classes,
)
from .estimators import GrassmannSubspaceRegressor, SphereClassifier
from .exceptions import DatasetUnavailable, InvalidConfig
from .grassmann import (
    GrassPole,
    frechet_mean,
    geodesic_distance,
    grassmann_exp,
    grassmann_log,
    max_distance,
    procrustes_align,
    subspace_from_span,
)
from .network import LossSpec, Network, gradient_check

F2IS_DEFAULTS = {
    "seed": 0,
    "subjects": 60,
    "n": 64,
    "d": 5,
    "samples_per_subject": 16,
    "noise": 0.05,
    "spread": 0.7,
    "latent_dim": 4,
    "framework": "tangent",
    "pole": "frechet",
    "hidden": "128",
    "lr": 1e-3,
    "batch": 30,
    "iterations": 3000,
}

CLASSIFY_DEFAULTS = {
    "seed": 0,
    "loss": "sphere_geodesic",
    "lambda": 1.0,
    "hidden": "64",
    "lr": 1e-3,
    "batch": 100,
    "iterations": 5000,
    "classes": 10,
    "dim": 32,
    "per_class": 200,
    "spread": 0.15,
    "train_fraction": 0.8,
    "train_size": 10000,
    "test_size": 2000,
}

GEOMCHECK_DEFAULTS = {"seed": 0, "plant_gradient_fault": 0}

_TYPES = {
    "seed": int,
    "subjects": int,
    "n": int,
    "d": int,
    "samples_per_subject": int,
    "latent_dim": int,
    "batch": int,
    "iterations": int,
    "classes": int,
    "dim": int,
    "per_class": int,
    "train_size": int,
    "test_size": int,
    "plant_gradient_fault": int,
    "noise": float,
    "spread": float,
    "lr": float,
    "lambda": float,
    "train_fraction": float,
}


def parse_config(path=None, overrides=None, defaults=None):
    """Flat key=value file plus override pairs, typed against defaults."""
    cfg = dict(defaults or {})
    entries = []
    if path:
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise InvalidConfig(f"bad config line: {line!r}")
                entries.append(line.split("=", 1))
    for item in overrides or []:
        if "=" not in item:
            raise InvalidConfig(f"bad override: {item!r}")
        entries.append(item.split("=", 1))
    for key, value in entries:
        key, value = key.strip(), value.strip()
        if key not in cfg:
            raise InvalidConfig(f"unknown config key {key!r}")
        cfg[key] = _TYPES.get(key, str)(value)
    return cfg


def _hidden_sizes(spec):
    return tuple(int(s) for s in str(spec).split(",") if s.strip())


def run_f2is(cfg):
    t0 = time.time()
    data = generate_f2is(
        seed=cfg["seed"],
        n_subjects=cfg["subjects"],
        n=cfg["n"],
        d=cfg["d"],
        samples_per_subject=cfg["samples_per_subject"],
        noise=cfg["noise"],
        spread=cfg["spread"],
        latent_dim=cfg["latent_dim"],
    )
    model = GrassmannSubspaceRegressor(
        d=cfg["d"],
        framework=cfg["framework"],
        pole=cfg["pole"],
        hidden=_hidden_sizes(cfg["hidden"]),
        lr=cfg["lr"],
        batch_size=cfg["batch"],
        iterations=cfg["iterations"],
        seed=cfg["seed"],
    )

    def flatten(ids):
        x = data.stacked_inputs(ids)
        y = np.stack(
            [
                data.subjects[i].true_subspace
                for i in ids
                for _ in range(cfg["samples_per_subject"])
            ]
        )
        pres = np.stack(
            [
                data.subjects[i].presented_basis
                for i in ids
                for _ in range(cfg["samples_per_subject"])
            ]
        )
        return x, y, pres

    x_tr, y_tr, pres_tr = flatten(data.train_ids)
    x_te, y_te, _ = flatten(data.test_ids)

    # the baseline is trained on the corrupted presented bases
    model.fit(x_tr, pres_tr if cfg["framework"] == "baseline" else y_tr)
    per_sample = model.distances(x_te, y_te)
    train_dist = model.distances(x_tr, y_tr)

    bound = max_distance(cfg["d"])
    return {
        "experiment": "f2is",
        "config": dict(cfg),
        "seed": cfg["seed"],
        "scalars": {
            "mean_test_distance": float(np.mean(per_sample)),
            "mean_train_distance": float(np.mean(train_dist)),
            "max_test_distance": float(np.max(per_sample)),
            "distance_bound": float(bound),
            "final_loss": float(model.loss_curve_[-1][1]),
        },
        "loss_curve": [[int(i), float(v)] for i, v in model.loss_curve_],
        "per_sample": [float(v) for v in per_sample],
        "wall_clock_s": time.time() - t0,
    }


def _load_classification(cfg):
    data_dir = os.environ.get("DATA_DIR", "")
    train_imgs = os.path.join(data_dir, "train-images-idx3-ubyte")
    train_lbls = os.path.join(data_dir, "train-labels-idx1-ubyte")
    if data_dir and os.path.exists(train_imgs) and os.path.exists(train_lbls):
        full = load_idx(train_imgs, train_lbls)
        n_train, n_test = cfg["train_size"], cfg["test_size"]
        if len(full.labels) < n_train + n_test:
            raise DatasetUnavailable("IDX files smaller than requested subset")
        tr = slice(0, n_train)
        te = slice(n_train, n_train + n_test)
        return (full.inputs[tr], full.labels[tr], full.inputs[te], full.labels[te],
                full.n_classes, "idx_files")
    data = synthetic_gaussian_classes(
        cfg["seed"], cfg["classes"], cfg["dim"], cfg["per_class"], cfg["spread"]
    )
    n_train = int(cfg["train_fraction"] * len(data.labels))
    return (data.inputs[:n_train], data.labels[:n_train], data.inputs[n_train:],
            data.labels[n_train:], data.n_classes, "synthetic_gaussian")


def run_classify(cfg):
    t0 = time.time()
    x_tr, y_tr, x_te, y_te, n_classes, source = _load_classification(cfg)
    model = SphereClassifier(
        loss=cfg["loss"],
        hidden=_hidden_sizes(cfg["hidden"]),
        lr=cfg["lr"],
        batch_size=cfg["batch"],
        iterations=cfg["iterations"],
        lam=cfg["lambda"],
        seed=cfg["seed"],
    )
    model.fit(x_tr, y_tr)
    pred = model.predict(x_te)
    acc = float(np.mean(pred == y_te))
    return {
        "experiment": "classify",
        "config": dict(cfg),
        "seed": cfg["seed"],
        "source": source,
        "scalars": {
            "test_accuracy": acc,
            "train_accuracy": float(np.mean(model.predict(x_tr) == y_tr)),
            "final_loss": float(model.loss_curve_[-1][1]),
            "n_classes": n_classes,
        },
        "loss_curve": [[int(i), float(v)] for i, v in model.loss_curve_],
        "per_sample": [[int(t), int(p)] for t, p in zip(y_te, pred)],
        "wall_clock_s": time.time() - t0,
    }


def run_geomcheck(cfg):
    """Property suites over the geometry and gradient machinery."""
    t0 = time.time()
    rng = np.random.default_rng(cfg["seed"])
    suites = {}

    # sphere roundtrip
    worst = 0.0
    for _ in range(1000):
        p = rng.standard_normal(8)
        p /= np.linalg.norm(p)
        y = rng.standard_normal(8)
        y /= np.linalg.norm(y)
        if sphere.sphere_distance(p, y) >= 3.0:
            continue
        xi = sphere.sphere_log(p, y)
        worst = max(worst, sphere.sphere_distance(sphere.sphere_exp(p, xi), y))
    suites["sphere_roundtrip"] = {"max_residual": worst, "ok": worst <= 1e-9}

    # grassmann roundtrip + isometry in G(20, 3)
    worst_rt, worst_iso = 0.0, 0.0
    for _ in range(200):
        pole = GrassPole.from_basis(subspace_from_span(rng.standard_normal((20, 3))))
        a = rng.standard_normal((17, 3))
        a *= rng.uniform(0.05, 1.15) / np.linalg.norm(a)
        target = grassmann_exp(pole, a)
        dist = geodesic_distance(pole.basis, target)
        if dist >= 1.2:
            continue
        back = grassmann_log(pole, target)
        worst_rt = max(
            worst_rt, geodesic_distance(grassmann_exp(pole, back), target)
        )
        worst_iso = max(worst_iso, abs(np.linalg.norm(back) - dist))
    suites["grassmann_roundtrip"] = {"max_residual": worst_rt, "ok": worst_rt <= 1e-8}
    suites["grassmann_isometry"] = {"max_residual": worst_iso, "ok": worst_iso <= 1e-8}

    # distance bound and the fully-orthogonal maxima
    bound_err = 0.0
    for d in (3, 4, 5):
        u1 = np.eye(2 * d)[:, :d]
        u2 = np.eye(2 * d)[:, d:]
        bound_err = max(bound_err, abs(geodesic_distance(u1, u2) - max_distance(d)))
    suites["distance_bound"] = {"max_residual": bound_err, "ok": bound_err <= 1e-6}

    # Frechet mean first-order condition on a random cluster
    pole = GrassPole.from_basis(subspace_from_span(rng.standard_normal((12, 3))))
    samples = []
    for _ in range(6):
        a = rng.standard_normal((9, 3))
        samples.append(grassmann_exp(pole, a * (0.4 / np.linalg.norm(a))))
    mean = frechet_mean(samples)
    resid = np.linalg.norm(
        sum(grassmann_log(mean, s) for s in samples) / len(samples)
    )
    suites["frechet_mean"] = {"max_residual": float(resid), "ok": resid < 1e-6}

    # gradient checks, one per loss kind
    worst_grad = 0.0
    plant = bool(cfg.get("plant_gradient_fault"))
    from .network import LOSS_KINDS, SphereNormalize, TangentProject

    pole_s = sphere.uniform_pole(6)
    for kind in LOSS_KINDS:
        final = None
        if kind in ("sphere_euclidean", "sphere_geodesic"):
            final = SphereNormalize()
        elif kind == "tangent_projection":
            final = TangentProject(pole_s)
        net = Network.mlp([5, 8, 6], seed=cfg["seed"], final_layer=final)
        x = rng.standard_normal(5)
        if kind == "cross_entropy":
            target = np.eye(6)[int(rng.integers(6))]
        elif kind in ("sphere_euclidean", "sphere_geodesic"):
            target = np.eye(6)[int(rng.integers(6))]
        else:
            target = sphere.sphere_log(pole_s, np.eye(6)[int(rng.integers(6))])
        spec = LossSpec(kind, pole=pole_s)
        report = gradient_check(
            net, spec, x, target, corrupt=(0, 0) if plant else None
        )
        worst_grad = max(worst_grad, report.max_rel_error)
    suites["gradient_check"] = {"max_residual": worst_grad, "ok": worst_grad < 1e-4}

    # Procrustes never increases the distance to the reference
    worst_pro = 0.0
    for _ in range(100):
        r = subspace_from_span(rng.standard_normal((10, 3)))
        ref = subspace_from_span(rng.standard_normal((10, 3)))
        aligned = procrustes_align(r, ref)
        worst_pro = max(
            worst_pro,
            np.linalg.norm(ref - aligned) - np.linalg.norm(ref - r),
        )
    suites["procrustes"] = {"max_residual": worst_pro, "ok": worst_pro <= 1e-12}

    all_ok = all(s["ok"] for s in suites.values())
    return {
        "experiment": "geomcheck",
        "config": dict(cfg),
        "seed": cfg["seed"],
        "scalars": {
            "all_ok": bool(all_ok),
            **{f"{name}_residual": float(s["max_residual"]) for name, s in suites.items()},
        },
        "suites": {k: {"max_residual": float(v["max_residual"]), "ok": bool(v["ok"])}
                   for k, v in suites.items()},
        "per_sample": [],
        "wall_clock_s": time.time() - t0,
    }
