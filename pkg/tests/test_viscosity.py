import json

import numpy as np
import pytest

from lipapprox.data import builtin_field
from lipapprox.errors import GridMismatch
from lipapprox.grid import ScalarField, build_grid, field_from_function, interval
from lipapprox.lip1d import project_lip_1d
from lipapprox.metric import boundary_distance
from lipapprox.projector import project_lip_graph
from lipapprox.viscosity import (
    boundary_condition_check,
    combined_residual,
    double_inequality_check,
    eikonal_residual,
    forced_regions,
    infinity_laplacian,
    infinity_laplacian_residual,
    regions,
    upwind_gradient,
)


def projected(case, n):
    f = builtin_field(case, n)
    return f, project_lip_1d(f)


def test_identical_fields_have_empty_regions():
    f = builtin_field("case3", 101)
    rep = regions(f, f)
    assert not rep.plus.any() and not rep.minus.any()
    assert not rep.a_plus.any() and not rep.a_minus.any()


def test_region_invariants_and_default_tau():
    f, u = projected("case3", 401)
    rep = regions(u, f)
    assert rep.tau == pytest.approx(f.grid.h[0])
    assert not np.any(rep.plus & rep.minus)
    assert np.all(rep.a_plus[rep.plus]) and np.all(rep.a_minus[rep.minus])
    json.loads(rep.to_json())


def test_case2_regions():
    f, u = projected("case2", 2001)
    rep = regions(u, f)
    h, tau = f.grid.h[0], rep.tau
    x = f.x
    # u - f = 1/2 - |x|: positive inside, negative outside
    assert x[rep.plus].max() == pytest.approx(0.5, abs=2 * h + tau)
    assert x[rep.plus].min() == pytest.approx(-0.5, abs=2 * h + tau)
    assert np.all(np.abs(x[rep.minus]) > 0.5)
    assert rep.bd_minus.sum() == 2 and rep.bd_plus.sum() == 0


def test_case1_regions():
    f, u = projected("case1", 2001)
    rep = regions(u, f)
    x = np.abs(f.x)
    H = 0.4 + (np.sqrt(3.2) - 0.8) / 2
    assert x[rep.minus].max() < 0.4
    assert x[rep.plus].min() >= 0.4 and x[rep.plus].max() == pytest.approx(H, abs=0.01)


def test_regions_grid_mismatch():
    with pytest.raises(GridMismatch):
        regions(builtin_field("case2", 11), builtin_field("case2", 13))
    f = builtin_field("case2", 11)
    with pytest.raises(GridMismatch):
        eikonal_residual(f, regions(builtin_field("case2", 13), builtin_field("case2", 13)))


def test_nonempty_regions_when_infeasible(rng):
    g = build_grid(2, (-1, 1), 13)
    f = ScalarField(g, rng.uniform(-2, 2, g.num_nodes))
    u, _ = project_lip_graph(f)
    rep = regions(u, f, tau=1e-9)
    assert rep.plus.any() and rep.minus.any()


def test_case2_eikonal_residual():
    res = {}
    for n in (401, 801):
        f, u = projected("case2", n)
        e = eikonal_residual(u, regions(u, f))
        assert e["plus"]["count"] > 0 and e["minus"]["count"] > 0
        res[n] = max(e["plus"]["max"], e["minus"]["max"])
    assert res[401] <= 0.1
    assert max(res[801], 1e-10) * 1.2 <= max(res[401], 1e-10) or max(res.values()) <= 1e-10


def test_zero_field_has_unit_residual():
    g = build_grid(2, (-1, 1), 21)
    u = ScalarField(g, np.zeros(g.num_nodes))
    e = eikonal_residual(u, forced_regions(g, minus=~g.boundary))
    m = e["minus_mask"]
    assert m.any() and np.all(e["field"][m] == 1.0)


def test_boundary_distance_residual_on_disk():
    # off the axes the 8-stencil graph distance has octagonal level sets, so the
    # upwind residual is bounded by the stencil defect sqrt(2) - 1, not by h
    for n in (41, 81):
        g = build_grid(2, (-1, 1), n, ("disk", (0, 0), 1.0))
        d = boundary_distance(g)
        e = eikonal_residual(d, forced_regions(g, minus=~g.boundary))
        assert e["minus"]["count"] > 0
        assert e["minus"]["max"] <= np.sqrt(2) - 1 + 1e-9
        assert e["minus"]["mean"] <= 0.25


def test_upwind_gradient_of_cone():
    g = interval(101)
    u = field_from_function(g, lambda x: np.abs(x - 0.2))
    gr = upwind_gradient(u)
    vertex = np.argmin(u.values)
    assert gr[vertex] == 0.0  # upwind scheme sees no descent at a minimum
    assert np.allclose(np.delete(gr, vertex), 1.0)


def test_infinity_laplacian_affine_and_cone():
    g = build_grid(2, (-1, 1), 21)
    a = field_from_function(g, lambda x, y: 0.3 * x - 0.7 * y + 1)
    lap = infinity_laplacian(a)
    interior = ~g.boundary
    assert np.max(np.abs(lap[interior])) <= 1e-12
    g1 = interval(201)
    cone = field_from_function(g1, lambda x: np.abs(x - 0.3))
    lap = infinity_laplacian(cone)
    far = np.abs(g1.coords[:, 0] - 0.3) > 2 * g1.h[0]
    assert np.max(np.abs(lap[far & ~g1.boundary])) <= 1e-10


def test_infinity_laplacian_of_parabola():
    g = interval(401)
    u = field_from_function(g, lambda x: 0.5 * x**2)
    x = g.coords[:, 0]
    inner = ~g.boundary
    norm = infinity_laplacian_residual(u).values
    assert np.max(np.abs(norm[inner] - 1.0)) <= 1e-9
    raw = infinity_laplacian(u, normalized=False)
    assert np.max(np.abs(raw[inner] - x[inner] ** 2)) <= 4 * g.h[0]


def test_combined_residual_bounded_by_eikonal():
    f, u = projected("case2", 401)
    rep = regions(u, f)
    c = combined_residual(u, rep)
    h = f.grid.h[0]
    assert c["plus_excess"] <= 5 * h and c["minus_excess"] <= 5 * h


def test_boundary_conditions_case2():
    for n in (401, 2001):
        f, u = projected("case2", n)
        chk = boundary_condition_check(u, f)
        assert chk.passed, chk.to_dict()
        assert chk.slack == pytest.approx(3 * f.grid.h[0])


def test_boundary_conditions_vacuous_for_feasible():
    g = interval(51)
    f = field_from_function(g, lambda x: 0.5 * x)
    chk = boundary_condition_check(f, f)
    assert chk.passed and all(r["nodes"] == 0 for r in chk.rows)


def test_boundary_detector_fires_on_flat_plus_region():
    g = interval(101)
    f = ScalarField(g, np.zeros(101))
    u = ScalarField(g, np.full(101, 0.3))
    chk = boundary_condition_check(u, f)
    assert not chk.passed
    assert chk.rows[0]["violations"] == 2


def test_double_inequality_for_projections(rng):
    for f in (builtin_field("case1", 501), builtin_field("case3", 501)):
        assert double_inequality_check(project_lip_1d(f))["passed"]
    g = build_grid(2, (-1, 1), 15, "lshape")
    f = ScalarField(g, rng.uniform(-2, 2, g.num_nodes))
    u, _ = project_lip_graph(f)
    assert double_inequality_check(u)["passed"]
    assert not double_inequality_check(f)["passed"]
