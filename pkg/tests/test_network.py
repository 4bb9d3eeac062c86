import zlib

import numpy as np
import pytest

from manifoldnet import sphere
from manifoldnet.exceptions import NonFiniteLoss, ShapeMismatch, StaleCache
from manifoldnet.network import (
    LOSS_KINDS,
    Adam,
    Dense,
    LossSpec,
    Network,
    ReLU,
    SphereNormalize,
    TangentProject,
    gradient_check,
    loss_and_grad,
    train,
)


def make_net(kind, seed=0, n_in=5, n_out=6):
    pole = sphere.uniform_pole(n_out)
    final = None
    if kind in ("sphere_euclidean", "sphere_geodesic"):
        final = SphereNormalize()
    elif kind == "tangent_projection":
        final = TangentProject(pole)
    return Network.mlp([n_in, 8, n_out], seed=seed, final_layer=final), pole


def target_for(kind, pole, rng, n_out=6):
    k = int(rng.integers(n_out))
    if kind in ("cross_entropy", "sphere_euclidean", "sphere_geodesic"):
        return np.eye(n_out)[k]
    if kind.startswith("tangent") and kind != "tangent_coords":
        return sphere.sphere_log(pole, np.eye(n_out)[k])
    return rng.standard_normal(n_out)


def test_identity_dense_forward():
    rng = np.random.default_rng(0)
    layer = Dense(4, 4, rng)
    layer.w = np.eye(4)
    layer.b = np.zeros(4)
    x = rng.standard_normal(4)
    assert np.allclose(layer.forward(x), x)


def test_relu_forward():
    layer = ReLU()
    assert np.allclose(layer.forward(np.array([-1.0, 2.0])), [0.0, 2.0])


def test_sphere_normalize_forward():
    layer = SphereNormalize()
    assert np.allclose(layer.forward(np.array([3.0, 4.0])), [0.6, 0.8])


def test_backward_requires_forward():
    net = Network.mlp([3, 3], seed=0)
    with pytest.raises(StaleCache):
        net.backward(np.ones(3))


def test_identity_dense_hand_gradient():
    rng = np.random.default_rng(1)
    layer = Dense(3, 3, rng)
    layer.w = np.eye(3)
    layer.b = np.zeros(3)
    net = Network([layer])
    x = rng.standard_normal(3)
    t = rng.standard_normal(3)
    out = net.forward(x)
    net.backward(out - t)  # grad of 0.5 ||out - t||^2
    assert np.allclose(layer.grad_w, np.outer(x - t, x))


def test_zero_upstream_gradient():
    net = Network.mlp([4, 6, 3], seed=2)
    net.forward(np.ones(4))
    net.backward(np.zeros(3))
    assert all(np.allclose(g, 0) for g in net.grads())


def test_cross_entropy_uniform_prediction():
    loss, _ = loss_and_grad(LossSpec("cross_entropy"), np.zeros(10), np.eye(10)[4])
    assert abs(loss - np.log(10)) <= 1e-12


def test_sphere_geodesic_values():
    spec = LossSpec("sphere_geodesic")
    t = np.eye(4)[0]
    assert loss_and_grad(spec, t.copy(), t)[0] == pytest.approx(0.0, abs=1e-12)
    assert loss_and_grad(spec, np.eye(4)[1], t)[0] == pytest.approx(1.0)
    assert loss_and_grad(spec, -t, t)[0] == pytest.approx(2.0)


def test_tangent_orthogonal_zero_at_target():
    pole = sphere.uniform_pole(5)
    xi = sphere.sphere_log(pole, np.eye(5)[2])
    loss, _ = loss_and_grad(LossSpec("tangent_orthogonal", pole=pole), xi.copy(), xi)
    assert loss <= 1e-20


def test_loss_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        loss_and_grad(LossSpec("tangent_euclidean"), np.zeros(3), np.zeros(4))


def test_loss_nonfinite():
    with pytest.raises(NonFiniteLoss):
        loss_and_grad(LossSpec("tangent_euclidean"), np.array([np.inf, 0.0]), np.zeros(2))


def probe_away_from_kinks(net, rng, n_in, margin=1e-3):
    """Draw inputs until every ReLU pre-activation clears the kink."""
    for _ in range(500):
        x = rng.standard_normal(n_in)
        out = x
        ok = True
        try:
            for layer in net.layers:
                if isinstance(layer, ReLU):
                    ok = ok and np.min(np.abs(out)) > margin
                out = layer.forward(out)
        except NonFiniteLoss:  # e.g. all-dead hidden layer before normalization
            continue
        if ok:
            return x
    raise AssertionError("could not find a kink-free probe")


@pytest.mark.parametrize("kind", LOSS_KINDS)
def test_gradient_check_all_kinds(kind):
    rng = np.random.default_rng(zlib.crc32(kind.encode()))
    for probe in range(5):
        net, pole = make_net(kind, seed=probe)
        x = probe_away_from_kinks(net, rng, 5)
        t = target_for(kind, pole, rng)
        report = gradient_check(net, LossSpec(kind, pole=pole), x, t)
        assert report.max_rel_error < 1e-4


def test_gradient_check_quadratic_near_exact():
    net = Network([Dense(3, 3, np.random.default_rng(0))])
    rng = np.random.default_rng(1)
    report = gradient_check(
        net, LossSpec("tangent_euclidean"), rng.standard_normal(3), rng.standard_normal(3)
    )
    assert report.max_rel_error < 1e-7


def test_gradient_check_flags_planted_fault():
    net, pole = make_net("tangent_euclidean")
    rng = np.random.default_rng(2)
    report = gradient_check(
        net,
        LossSpec("tangent_euclidean"),
        rng.standard_normal(5),
        rng.standard_normal(6),
        corrupt=(0, 0),
    )
    assert report.max_rel_error > 0.3
    assert report.worst == (0, 0)


def test_whole_network_batch_gradcheck():
    # batched loss path against per-entry finite differences
    rng = np.random.default_rng(3)
    net = Network.mlp([4, 6, 3], seed=5)
    x = rng.standard_normal((7, 4))
    t = rng.standard_normal((7, 3))
    spec = LossSpec("tangent_coords")
    report = gradient_check(net, spec, x, t)
    assert report.max_rel_error < 1e-4


def test_adam_first_step_magnitude():
    params = [np.array([1.0, -2.0, 0.5])]
    grads = [np.array([0.3, -0.7, 0.0])]
    opt = Adam(params, lr=1e-3)
    before = params[0].copy()
    opt.step(params, grads)
    delta = params[0] - before
    # bias-corrected first step is ~lr against the gradient sign
    assert np.allclose(np.abs(delta[:2]), 1e-3, rtol=1e-4)
    assert np.sign(delta[0]) == -1 and np.sign(delta[1]) == 1
    assert delta[2] == 0.0


def test_adam_zero_gradient_noop():
    params = [np.ones(3)]
    opt = Adam(params)
    opt.step(params, [np.zeros(3)])
    assert np.allclose(params[0], 1.0)


def test_adam_quadratic_descent():
    w = [np.array([1.0, 1.0])]
    opt = Adam(w, lr=1e-2)
    norms = []
    for _ in range(100):
        opt.step(w, [2.0 * w[0]])
        norms.append(np.linalg.norm(w[0]))
    assert all(a >= b for a, b in zip(norms[1:], norms[2:]))
    assert norms[-1] < norms[0]


def test_adam_shape_mismatch():
    params = [np.ones(3)]
    opt = Adam(params)
    with pytest.raises(ShapeMismatch):
        opt.step(params, [np.ones(4)])


def test_training_reduces_loss_each_kind():
    rng = np.random.default_rng(6)
    for kind in LOSS_KINDS:
        net, pole = make_net(kind, seed=7)
        x = rng.standard_normal((32, 5))
        t = np.stack([target_for(kind, pole, rng) for _ in range(32)])
        curve = train(net, x, t, LossSpec(kind, pole=pole), 200, 32, 1e-2, seed=8)
        assert curve[-1][1] < 0.5 * curve[0][1], kind


def test_training_determinism():
    def run():
        net, _ = make_net("tangent_coords", seed=9)
        rng = np.random.default_rng(10)
        x = rng.standard_normal((16, 5))
        t = rng.standard_normal((16, 6))
        train(net, x, t, LossSpec("tangent_coords"), 50, 8, 1e-3, seed=11)
        return net.params()

    p1, p2 = run(), run()
    assert all(np.array_equal(a, b) for a, b in zip(p1, p2))


def test_constraint_layer_outputs():
    rng = np.random.default_rng(12)
    net, _ = make_net("sphere_geodesic")
    out = net.forward(rng.standard_normal((10, 5)))
    assert np.max(np.abs(np.linalg.norm(out, axis=1) - 1.0)) <= 1e-12
    net, pole = make_net("tangent_projection")
    out = net.forward(rng.standard_normal((10, 5)))
    assert np.max(np.abs(out @ pole)) <= 1e-12
