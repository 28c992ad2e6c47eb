import numpy as np
import pytest

from taafs.basis import BasisSpec, Family, default_spec
from taafs.net import Topology
from taafs.taaf import (ActivationCurve, Granularity, LayerShape, Normalizer, TaafUnit,
                        export_curve, instantiate_units, read_curves, taaf_backward,
                        taaf_forward, write_curves)

from fdcheck import central_diff, rel_err


def identity_cheb(normalizer="tanh", degree=5):
    spec = BasisSpec("chebyshev1", degree)
    theta = np.zeros(spec.basis_count)
    theta[1] = 1.0
    return TaafUnit(spec, theta, normalizer=normalizer)


def dp_shapes():
    return Topology.parse("embedding:25,25,25;fitting:50,50,50,1", 4).layer_shapes()


# -- forward ----------------------------------------------------------------


def test_zero_theta_gives_zero():
    spec = default_spec("bspline")
    unit = TaafUnit(spec, np.zeros(spec.basis_count))
    z = np.linspace(-4, 4, 9)
    np.testing.assert_array_equal(unit(z), 0.0)


def test_identity_theta_recovers_tanh():
    z = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(identity_cheb()(z), np.tanh(z), atol=1e-15)


@pytest.mark.parametrize("family", list(Family), ids=str)
def test_init_approximates_tanh(family):
    unit = TaafUnit.initialized(default_spec(family))
    z = np.array([-2.0, 0.0, 2.0])
    assert np.max(np.abs(unit(z) - np.tanh(z))) <= 0.02


def test_init_identity_normalizer_fits_tanh_on_domain():
    unit = TaafUnit.initialized(default_spec("bspline"), normalizer="identity")
    z = np.linspace(-1, 1, 21)
    assert np.max(np.abs(unit(z) - np.tanh(z))) <= 0.02


def test_forward_matches_call():
    unit = TaafUnit.initialized(default_spec("fourier"))
    z = np.random.default_rng(0).normal(size=(5, 3))
    y, cache = taaf_forward(unit, z)
    np.testing.assert_array_equal(y, unit(z))
    assert cache.values.shape == (5, 3, unit.spec.basis_count)


def test_bias_adds_constant():
    unit = TaafUnit.initialized(default_spec("bspline"), use_bias=True)
    base = unit(np.array([0.3, -1.0]))
    unit.bias[...] = 0.25
    np.testing.assert_allclose(unit(np.array([0.3, -1.0])), base + 0.25)
    assert unit.n_params == 9


def test_theta_shape_checked():
    with pytest.raises(ValueError, match="theta"):
        TaafUnit(default_spec("bspline"), np.zeros(3))


# -- backward ---------------------------------------------------------------


def test_zero_upstream_gives_zero_gradients():
    unit = TaafUnit.initialized(default_spec("bspline"), use_bias=True)
    _, cache = taaf_forward(unit, np.array([0.1, 0.7]))
    dz, dtheta, dbias = taaf_backward(unit, cache, 0.0)
    assert not dz.any() and not dtheta.any() and dbias == 0.0


def test_identity_unit_derivative_at_zero():
    unit = identity_cheb()
    _, cache = taaf_forward(unit, 0.0)
    dz, _, _ = taaf_backward(unit, cache, 1.0)
    assert dz == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("family", list(Family), ids=str)
@pytest.mark.parametrize("normalizer", list(Normalizer), ids=str)
def test_unit_gradients_match_finite_differences(family, normalizer):
    rng = np.random.default_rng(7)
    spec = default_spec(family)
    unit = TaafUnit(spec, rng.normal(size=spec.basis_count), rng.normal(size=()),
                    normalizer=normalizer, use_bias=True)
    lim = 0.95 if normalizer is Normalizer.IDENTITY else 2.5
    z = rng.uniform(-lim, lim, 6)
    w = rng.normal(size=6)

    def loss():
        return float(np.sum(w * unit(z)))

    _, cache = taaf_forward(unit, z)
    dz, dtheta, dbias = taaf_backward(unit, cache, w)
    num_z, = central_diff(lambda: loss(), [z])
    num_theta, num_bias = central_diff(loss, [unit.theta, unit.bias])
    assert rel_err(dz, num_z).max() <= 1e-6
    assert rel_err(dtheta, num_theta).max() <= 1e-6
    assert rel_err(dbias, num_bias).max() <= 1e-6


# -- granularity -----------------------------------------------------------


@pytest.mark.parametrize("scheme,n_units", [
    ("global", 1), ("per_network", 2), ("per_layer", 6), ("per_neuron", 225)])
def test_dp_unit_counts(scheme, n_units):
    units, binding = instantiate_units(scheme, dp_shapes(), default_spec("bspline"))
    assert len(units) == n_units
    assert sum(u.n_params for u in units) == 8 * n_units
    assert binding[-1] is None
    assert sum(len(b) for b in binding if b is not None) == 225


def test_unit_ids_name_their_scope():
    shapes = dp_shapes()
    ids = {s: [u.unit_id for u in instantiate_units(s, shapes, default_spec("bspline"))[0]]
           for s in Granularity}
    assert ids[Granularity.GLOBAL] == ["global"]
    assert ids[Granularity.PER_NETWORK] == ["embedding", "fitting"]
    assert ids[Granularity.PER_LAYER][3] == "fitting.L0"
    assert ids[Granularity.PER_NEURON][0] == "embedding.L0.n0"


def test_shared_gradient_is_sum_of_per_neuron_gradients():
    shapes = [LayerShape("net", 0, 4, True)]
    spec = default_spec("bspline")
    shared, _ = instantiate_units("per_layer", shapes, spec)
    single, _ = instantiate_units("per_neuron", shapes, spec)
    rng = np.random.default_rng(3)
    shared[0].theta[:] = rng.normal(size=spec.basis_count)
    for u in single:
        u.theta[:] = shared[0].theta
    z = rng.normal(size=(5, 4))
    g = rng.normal(size=(5, 4))
    _, cache = taaf_forward(shared[0], z)
    _, dtheta_shared, _ = taaf_backward(shared[0], cache, g)
    total = np.zeros(spec.basis_count)
    for j, u in enumerate(single):
        _, c = taaf_forward(u, z[:, j])
        total += taaf_backward(u, c, g[:, j])[1]
    np.testing.assert_allclose(dtheta_shared, total, rtol=1e-13, atol=1e-14)


def test_empty_layers_rejected():
    with pytest.raises(ValueError):
        instantiate_units("global", [], default_spec("bspline"))


# -- curves -----------------------------------------------------------------


def test_identity_curve_matches_tanh():
    c = export_curve(identity_cheb(), 201)
    np.testing.assert_allclose(c.ys, np.tanh(c.xs), atol=1e-12)
    assert c.xs[0] == -3.0 and c.xs[-1] == 3.0


def test_zero_theta_curve_is_flat_at_bias():
    spec = default_spec("fourier")
    c = export_curve(TaafUnit(spec, np.zeros(spec.basis_count), 0.4, use_bias=True), 11)
    np.testing.assert_array_equal(c.ys, 0.4)


def test_curve_csv_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    spec = default_spec("grbf")
    curves = [export_curve(TaafUnit(spec, rng.normal(size=spec.basis_count), unit_id=f"u{i}"),
                           37, epoch=4) for i in range(3)]
    path = tmp_path / "curves.csv"
    write_curves(path, curves)
    back = read_curves(path)
    assert back == curves
    assert all(isinstance(c, ActivationCurve) for c in back)


def test_curve_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_curves(p)


def test_curve_needs_two_samples():
    with pytest.raises(ValueError):
        export_curve(identity_cheb(), 1)
