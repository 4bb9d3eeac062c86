"""Feed-forward network with manual backprop, Adam, and geometric losses.

Layers operate on single vectors (1-D) or minibatches (2-D, one row per
sample). Losses return the batch-mean value and the gradient with
respect to the raw network output; constraint layers (SphereNormalize,
TangentProject) propagate exact Jacobian-vector products.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    NonFiniteLoss,
    ShapeMismatch,
    StaleCache,
)

LOSS_KINDS = (
    "cross_entropy",
    "sphere_euclidean",
    "sphere_geodesic",
    "tangent_euclidean",
    "tangent_orthogonal",
    "tangent_projection",
    "baseline_basis",
    "tangent_coords",
)


def _rows(x):
    x = np.asarray(x, dtype=np.float64)
    return x[None, :] if x.ndim == 1 else x


class Dense:
    """Affine layer, He-uniform initialized."""

    def __init__(self, n_in, n_out, rng):
        limit = np.sqrt(6.0 / n_in)
        self.w = rng.uniform(-limit, limit, size=(n_out, n_in))
        self.b = np.zeros(n_out)
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self._x = None

    def forward(self, x):
        if x.shape[-1] != self.w.shape[1]:
            raise DimensionMismatch("input width does not match layer")
        self._x = x
        return x @ self.w.T + self.b

    def backward(self, g):
        if self._x is None:
            raise StaleCache("backward without a cached forward")
        x = _rows(self._x)
        gr = _rows(g)
        self.grad_w = gr.T @ x
        self.grad_b = gr.sum(axis=0)
        return g @ self.w

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.grad_w, self.grad_b]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, g):
        if self._mask is None:
            raise StaleCache("backward without a cached forward")
        return g * self._mask

    def params(self):
        return []

    def grads(self):
        return []


class SphereNormalize:
    """Divide by the 2-norm; output rows are unit vectors."""

    def __init__(self):
        self._norm = None
        self._y = None

    def forward(self, x):
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise NonFiniteLoss("cannot normalize a zero vector")
        self._norm = norm
        self._y = x / norm
        return self._y

    def backward(self, g):
        if self._y is None:
            raise StaleCache("backward without a cached forward")
        y = self._y
        inner = np.sum(y * g, axis=-1, keepdims=True)
        return (g - inner * y) / self._norm

    def params(self):
        return []

    def grads(self):
        return []


class TangentProject:
    """Project onto the tangent space at a fixed pole: (I - uu^T) x."""

    def __init__(self, pole):
        self.pole = np.asarray(pole, dtype=np.float64)
        self._ran = False

    def forward(self, x):
        self._ran = True
        inner = x @ self.pole
        return x - np.multiply.outer(inner, self.pole).reshape(x.shape)

    def backward(self, g):
        if not self._ran:
            raise StaleCache("backward without a cached forward")
        inner = g @ self.pole
        return g - np.multiply.outer(inner, self.pole).reshape(g.shape)

    def params(self):
        return []

    def grads(self):
        return []


class Network:
    """Ordered layer stack with cached activations for backprop."""

    def __init__(self, layers):
        self.layers = list(layers)
        self._forward_done = False

    @classmethod
    def mlp(cls, sizes, seed, final_layer=None):
        """ReLU MLP with the given layer widths; optional constraint tail."""
        rng = np.random.default_rng(seed)
        layers = []
        for i in range(len(sizes) - 1):
            layers.append(Dense(sizes[i], sizes[i + 1], rng))
            if i < len(sizes) - 2:
                layers.append(ReLU())
        if final_layer is not None:
            layers.append(final_layer)
        return cls(layers)

    def forward(self, x):
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out)
        self._forward_done = True
        return out

    def backward(self, grad_out):
        if not self._forward_done:
            raise StaleCache("backward without a forward pass")
        g = grad_out
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def grads(self):
        return [g for layer in self.layers for g in layer.grads()]


@dataclass
class LossSpec:
    """Which loss to apply; tangent losses carry the sphere pole."""

    kind: str
    pole: np.ndarray = None
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ShapeMismatch(f"unknown loss kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")


def loss_and_grad(spec: LossSpec, output, target):
    """Batch-mean loss and its gradient w.r.t. the raw output."""
    out = _rows(output)
    tgt = _rows(target)
    if out.shape != tgt.shape:
        raise ShapeMismatch(f"output {out.shape} vs target {tgt.shape}")
    nb = out.shape[0]
    kind = spec.kind

    if kind == "cross_entropy":
        z = out - out.max(axis=1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = -np.sum(tgt * (z - lse)) / nb
        grad = (np.exp(z - lse) - tgt) / nb
    elif kind in ("sphere_euclidean", "sphere_geodesic"):
        norm = np.linalg.norm(out, axis=1, keepdims=True)
        yhat = out / norm
        if kind == "sphere_euclidean":
            loss = np.sum((tgt - yhat) ** 2) / nb
            dy = 2.0 * (yhat - tgt)
        else:
            loss = np.sum(1.0 - np.sum(tgt * yhat, axis=1)) / nb
            dy = -tgt
        inner = np.sum(yhat * dy, axis=1, keepdims=True)
        grad = (dy - inner * yhat) / norm / nb
    elif kind in ("tangent_euclidean", "baseline_basis", "tangent_coords"):
        loss = np.sum((tgt - out) ** 2) / nb
        grad = 2.0 * (out - tgt) / nb
    elif kind == "tangent_orthogonal":
        u = spec.pole
        inner = out @ u
        loss = (np.sum((tgt - out) ** 2) + spec.lam * np.sum(inner**2)) / nb
        grad = (2.0 * (out - tgt) + 2.0 * spec.lam * np.outer(inner, u)) / nb
    elif kind == "tangent_projection":
        u = spec.pole
        proj = out - np.outer(out @ u, u)
        loss = np.sum((tgt - proj) ** 2) / nb
        d = 2.0 * (proj - tgt)
        grad = (d - np.outer(d @ u, u)) / nb
    else:  # pragma: no cover - guarded by LossSpec
        raise ShapeMismatch(kind)

    if not np.isfinite(loss):
        raise NonFiniteLoss(f"{kind} produced a non-finite loss")
    if output.ndim == 1:
        grad = grad[0]
    return float(loss), grad


class Adam:
    """Standard Adam with bias correction."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        if len(params) != len(self.m):
            raise ShapeMismatch("parameter count changed")
        self.step_count += 1
        t = self.step_count
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeMismatch("gradient shape mismatch")
            self.m[i] = self.beta1 * self.m[i] + (1 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1 - self.beta2) * g * g
            mhat = self.m[i] / (1 - self.beta1**t)
            vhat = self.v[i] / (1 - self.beta2**t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class GradCheckReport:
    max_rel_error: float
    mean_rel_error: float
    worst: tuple = field(default=None)  # (param index, flat entry index)

    def ok(self, tol):
        return self.max_rel_error < tol


def gradient_check(net: Network, spec: LossSpec, x, target, h=1e-6, corrupt=None):
    """Central finite differences over every parameter entry.

    corrupt=(param_idx, flat_idx) doubles one analytic entry before the
    comparison; used to verify the checker actually detects faults.
    """
    if not 1e-8 <= h <= 1e-4:
        raise ValueError("step size out of the supported range")
    out = net.forward(x)
    _, grad_out = loss_and_grad(spec, out, target)
    net.backward(grad_out)
    analytic = [g.copy() for g in net.grads()]
    if corrupt is not None:
        pi, j = corrupt
        analytic[pi].reshape(-1)[j] *= 2.0

    errs = []
    worst = None
    worst_err = -1.0
    params = net.params()
    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        aflat = analytic[pi].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            lp, _ = loss_and_grad(spec, net.forward(x), target)
            flat[j] = orig - h
            lm, _ = loss_and_grad(spec, net.forward(x), target)
            flat[j] = orig
            numeric = (lp - lm) / (2 * h)
            diff = abs(numeric - aflat[j])
            if max(abs(numeric), abs(aflat[j])) <= 1e-5:
                # the difference quotient carries ~ulp(loss)/2h of roundoff
                # (about 1e-10 here), so a ratio against a tiny gradient
                # amplifies pure noise; score these entries by their
                # absolute disagreement instead
                rel = diff
            else:
                rel = diff / max(abs(numeric), abs(aflat[j]), 1e-8)
            errs.append(rel)
            if rel > worst_err:
                worst_err = rel
                worst = (pi, j)
    return GradCheckReport(
        max_rel_error=float(np.max(errs)),
        mean_rel_error=float(np.mean(errs)),
        worst=worst,
    )


def train(net, x, y, spec, iterations, batch_size, lr, seed, assert_constraints=False):
    """Minibatch Adam loop; returns sampled loss-curve points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    opt = Adam(net.params(), lr=lr)
    curve = []
    sample_every = max(1, iterations // 50)
    n = x.shape[0]
    for it in range(iterations):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        idx.sort()  # fixed accumulation order
        out = net.forward(x[idx])
        if assert_constraints:
            _check_constraint_layers(net, out)
        loss, grad = loss_and_grad(spec, out, y[idx])
        net.backward(grad)
        opt.step(net.params(), net.grads())
        if it % sample_every == 0 or it == iterations - 1:
            curve.append((it, loss))
    return curve


def _check_constraint_layers(net, out):
    last = net.layers[-1]
    if isinstance(last, SphereNormalize):
        if np.max(np.abs(np.linalg.norm(_rows(out), axis=1) - 1.0)) > 1e-12:
            raise NonFiniteLoss("normalize layer violated the unit constraint")
    elif isinstance(last, TangentProject):
        if np.max(np.abs(_rows(out) @ last.pole)) > 1e-12:
            raise NonFiniteLoss("projection layer violated tangency")
