"""Manifold-aware regression: sphere and Grassmann geometry plus small
neural networks whose outputs respect that geometry."""

from . import datasets, grassmann, linalg, network, sphere
from .estimators import GrassmannSubspaceRegressor, SphereClassifier

__all__ = [
    "datasets",
    "grassmann",
    "linalg",
    "network",
    "sphere",
    "GrassmannSubspaceRegressor",
    "SphereClassifier",
]

__version__ = "0.1.0"
