"""Grid, profile, initial-law, and config-parsing behaviour."""

import json

import numpy as np
import pytest

from lqmfg.errors import ModelConfigError
from lqmfg.model import (
    CoefficientSet,
    InitialLaw,
    TimeGrid,
    TimeProfile,
    ValidationReport,
    canonical_fingerprint,
    eval_profile,
    parse_coefficients,
    parse_grid,
    parse_initial_law,
    validate,
)


def test_grid_nodes_hit_endpoints_exactly():
    grid = TimeGrid(T=10.0, M=7)
    nodes = grid.nodes
    assert nodes[0] == 0.0
    assert nodes[-1] == 10.0
    assert len(nodes) == 8
    np.testing.assert_allclose(np.diff(nodes), grid.dt, rtol=1e-15)


def test_grid_rejects_bad_parameters():
    with pytest.raises(ModelConfigError):
        TimeGrid(T=-1.0, M=10)
    with pytest.raises(ModelConfigError):
        TimeGrid(T=1.0, M=1)
    with pytest.raises(ModelConfigError):
        TimeGrid(T=float("nan"), M=10)


def test_constant_profile_everywhere():
    p = TimeProfile.constant(3.5)
    assert eval_profile(p, 0.0) == 3.5
    assert eval_profile(p, 0.7231) == 3.5


def test_sampled_profile_exact_at_nodes_linear_between():
    grid = TimeGrid(T=1.0, M=4)
    vals = [0.0, 1.0, 4.0, 9.0, 16.0]
    p = TimeProfile.sampled(vals, grid)
    for t, v in zip(grid.nodes, vals):
        assert eval_profile(p, t) == v
    # midpoint of [0.25, 0.5] is the average of the endpoints
    assert eval_profile(p, 0.375) == pytest.approx(2.5, rel=1e-15)


def test_sampled_profile_rejects_out_of_range_time():
    grid = TimeGrid(T=1.0, M=4)
    p = TimeProfile.sampled(np.zeros(5), grid)
    with pytest.raises(ModelConfigError):
        eval_profile(p, 1.5)
    with pytest.raises(ModelConfigError):
        eval_profile(p, -0.1)


def test_sampled_profile_wrong_length():
    grid = TimeGrid(T=1.0, M=4)
    with pytest.raises(ModelConfigError):
        TimeProfile.sampled([1.0, 2.0], grid)


def test_half_values_interleave_nodes_and_midpoints():
    grid = TimeGrid(T=2.0, M=4)
    vals = np.array([1.0, 3.0, -1.0, 0.0, 5.0])
    p = TimeProfile.sampled(vals, grid)
    hv = p.half_values(grid)
    assert hv.shape == (9,)
    np.testing.assert_array_equal(hv[0::2], vals)
    np.testing.assert_allclose(hv[1::2], 0.5 * (vals[:-1] + vals[1:]))

    c = TimeProfile.constant(2.0)
    np.testing.assert_array_equal(c.half_values(grid), np.full(9, 2.0))


def test_profile_grid_alignment_enforced():
    grid = TimeGrid(T=1.0, M=4)
    other = TimeGrid(T=1.0, M=8)
    p = TimeProfile.sampled(np.ones(5), grid)
    with pytest.raises(ModelConfigError):
        p.node_values(other)


def test_initial_law_means():
    assert InitialLaw.uniform(0.0, 20.0).mean == 10.0
    assert InitialLaw.gaussian(1.5, 4.0).mean == 1.5
    assert InitialLaw.point(-2.0).mean == -2.0


def test_initial_law_sampling_matches_mean():
    rng = np.random.default_rng(7)
    law = InitialLaw.uniform(0.0, 20.0)
    xs = law.sample(rng, size=200_000)
    assert xs.min() >= 0.0 and xs.max() <= 20.0
    assert abs(xs.mean() - 10.0) < 0.05

    law = InitialLaw.gaussian(2.0, 9.0)
    xs = law.sample(rng, size=200_000)
    assert abs(xs.mean() - 2.0) < 0.05
    assert abs(xs.std() - 3.0) < 0.05

    law = InitialLaw.point(4.0)
    np.testing.assert_array_equal(law.sample(rng, size=5), np.full(5, 4.0))


def test_point_law_consumes_no_randomness():
    rng1 = np.random.default_rng(123)
    rng2 = np.random.default_rng(123)
    InitialLaw.point(1.0).sample(rng1, size=10)
    assert rng1.standard_normal() == rng2.standard_normal()


def test_validate_flags_and_errors():
    grid = TimeGrid(T=1.0, M=10)
    good = CoefficientSet.from_constants(Q=1.0, R=1.0, H=1.0)
    rep = validate(good, grid)
    assert isinstance(rep, ValidationReport)
    assert rep.a3_holds and not rep.r_indefinite and rep.all_finite

    indef = CoefficientSet.from_constants(Q=1.0, R=-0.5, H=1.0)
    rep = validate(indef, grid)
    assert rep.r_indefinite and rep.a3_holds
    assert any("allowed" in m for m in rep.messages)

    bad_q = CoefficientSet.from_constants(Q=-1.0, R=1.0, H=1.0)
    rep = validate(bad_q, grid)
    assert not rep.q_nonnegative and not rep.a3_holds

    with pytest.raises(ModelConfigError):
        CoefficientSet.from_constants(Q=float("inf"))


def test_config_roundtrip(tmp_path):
    cfg = {
        "grid": {"T": 2.0, "M": 8},
        "coefficients": {
            "A": 1.0, "B": 1.0, "C": 0.5, "D": 0.25,
            "f": 0.0, "g": 0.0, "Q": 2.0, "R": 1.0,
            "Gamma": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
            "eta": 0.0,
            "H": 1.0, "Gamma0": 0.5, "eta0": 0.1,
        },
        "initial": {"kind": "uniform", "a": 0.0, "b": 20.0},
    }
    grid = parse_grid(cfg)
    assert grid.T == 2.0 and grid.M == 8
    coeffs = parse_coefficients(cfg, grid)
    assert coeffs.Gamma.kind == "sampled"
    assert eval_profile(coeffs.Gamma, 2.0) == 0.8
    law = parse_initial_law(cfg)
    assert law.mean == 10.0


def test_config_missing_pieces():
    with pytest.raises(ModelConfigError):
        parse_grid({})
    with pytest.raises(ModelConfigError):
        parse_coefficients({"coefficients": {"A": 1.0}}, TimeGrid(T=1.0, M=2))
    with pytest.raises(ModelConfigError):
        parse_initial_law({"initial": {"kind": "binomial"}})


def test_fingerprint_invariant_under_key_order():
    a = {"x": 1, "y": [1, 2, 3], "z": {"p": 0.5, "q": -1}}
    b = {"z": {"q": -1, "p": 0.5}, "y": [1, 2, 3], "x": 1}
    assert canonical_fingerprint(a) == canonical_fingerprint(b)
    assert canonical_fingerprint(a) != canonical_fingerprint({"x": 2})
    digest = canonical_fingerprint({"k": 1})
    assert len(digest) == 64 and set(digest) <= set("0123456789abcdef")


def test_coefficient_dict_roundtrips_through_json():
    grid = TimeGrid(T=1.0, M=2)
    coeffs = CoefficientSet.from_constants(A=1.0, Q=2.0, H=3.0)
    d = coeffs.to_dict()
    blob = json.dumps(d)
    assert json.loads(blob) == d
