"""Model builders: parameter validation, assembled structure, cost variants."""

import numpy as np
import pytest

from mfclab.models import (AdvertisingParams, ValidationError, VintageParams,
                           build_advertising, build_model, build_vintage,
                           convex_variant_cost, inequality_report, mixture_law,
                           point_law)


def test_advertising_param_validation():
    with pytest.raises(ValidationError, match="own_rate"):
        AdvertisingParams(own_rate=0.1).validate()
    with pytest.raises(ValidationError, match="noise_level"):
        AdvertisingParams(noise_level=0.0).validate()
    with pytest.raises(ValidationError, match="memory_span"):
        AdvertisingParams(memory_span=-1.0).validate()
    with pytest.raises(ValidationError, match="own_kernel_scale"):
        AdvertisingParams(own_kernel_scale=0.2).validate()
    with pytest.raises(ValidationError, match="injection"):
        build_advertising(AdvertisingParams(injection=-1.0))


def test_vintage_param_validation():
    with pytest.raises(ValidationError, match="decay"):
        VintageParams(decay=0.0).validate()
    with pytest.raises(ValidationError, match="noise_rank"):
        VintageParams(noise_rank=0).validate()
    with pytest.raises(ValidationError, match="noise_rank"):
        build_vintage(VintageParams(nodes=5, noise_rank=6))
    with pytest.raises(ValidationError, match="age_span"):
        VintageParams(age_span=0.0).validate()


def test_build_model_dispatch():
    assert build_model("advertising").kind == "advertising"
    assert build_model("vintage").kind == "vintage"
    with pytest.raises(ValidationError):
        build_model("bogus")


def test_advertising_structure():
    params = AdvertisingParams()
    model = build_advertising(params)
    ds = model.system.drift_state
    assert ds[0, 0] == params.own_rate + 1.0
    kernel = params.own_kernel_scale * (1.0 + model.space.grid / params.memory_span)
    assert np.allclose(ds[0, 1:], model.space.weights * kernel, atol=1e-15)
    assert np.all(ds[1:] == 0.0)
    dm = model.system.drift_mean
    assert dm[0, 0] == params.mean_rate
    assert np.all(dm[1:] == 0.0)
    assert model.system.control_map[0, 0] == params.injection
    assert model.system.k_ctrl == 1 and model.system.k_noise == 1
    # reward gradient sits on the head only
    expect = np.zeros(model.space.dim)
    expect[0] = -(params.run_own + params.run_mean)
    assert np.array_equal(model.run_vec, expect)
    assert model.sdde_coeffs["b0"] == params.own_rate
    assert np.array_equal(model.sdde_coeffs["eta1"], kernel)


def test_vintage_structure():
    params = VintageParams()
    model = build_vintage(params)
    assert np.all(model.system.drift_state == 0.0)
    assert np.array_equal(model.system.drift_mean,
                          -params.mean_decay * np.eye(model.space.dim))
    assert np.array_equal(model.system.control_map, np.eye(model.space.dim))
    assert model.system.k_noise == params.noise_rank
    assert np.array_equal(model.cost.channel_weights, model.space.weights)
    # the reward weighting vanishes at the terminal age
    weighting = model.functionals["weighting"]
    assert weighting[0] == params.weighting_scale
    assert weighting[-1] == 0.0
    assert model.sdde_coeffs is None


def test_benchmark_costs_are_affine(delay_model, rng):
    # running_state(alpha x + (1-alpha) y) = alpha run(x) + (1-alpha) run(y)
    cost = delay_model.cost
    dim = delay_model.space.dim
    x = rng.standard_normal((2, 3, dim))
    y = rng.standard_normal((2, 3, dim))
    mx, my = x.mean(axis=1), y.mean(axis=1)
    alpha = 0.3
    mixed = cost.running_state(alpha * x + (1 - alpha) * y, alpha * mx + (1 - alpha) * my)
    split = alpha * cost.running_state(x, mx) + (1 - alpha) * cost.running_state(y, my)
    assert np.allclose(mixed, split, atol=1e-12)


def test_convex_variant_adds_mean_penalty(delay_model, vintage_model, rng):
    kappa = 0.4
    for model in (delay_model, vintage_model):
        base = model.cost
        convex = convex_variant_cost(model, kappa)
        states = rng.standard_normal((3, 4, model.space.dim))
        mean = states.mean(axis=1)
        if model.kind == "advertising":
            agg = mean[:, 0]
        else:
            agg = mean @ (model.space.weights * model.functionals["weighting"])
        want = base.running_state(states, mean) + kappa * (agg**2)[:, None]
        assert np.allclose(convex.running_state(states, mean), want, atol=1e-12)
        # terminal and control parts are untouched
        assert convex.terminal is base.terminal
        assert convex.control_cost is base.control_cost


def test_point_and_mixture_laws(delay_model, vintage_model):
    base = point_law(vintage_model, 1.0).base[0]
    assert base[0] == 0.0 and abs(base[-1]) < 1e-12  # vanishes at both ends
    with pytest.raises(ValidationError):
        mixture_law(delay_model, 0.0)
    with pytest.raises(ValidationError):
        mixture_law(delay_model, 1.2)
    law = mixture_law(delay_model, 0.7)
    assert law.base.shape == (2, delay_model.space.dim)
    assert np.allclose(law.weights, [0.7, 0.3])


def test_inequality_report_all_pass(delay_model, vintage_model):
    for model in (delay_model, vintage_model):
        rows = inequality_report(model, samples=100, seed=7)
        assert len(rows) == len(model.functionals)
        for row in rows:
            assert row["ok"], row
            assert row["max_ratio"] <= row["constant"] * (1.0 + 1e-9)
