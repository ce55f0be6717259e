"""Acceptance criteria, one test per criterion.

Every test logs a PASS/FAIL line (shown in the terminal summary) and then
asserts.  Runtimes are wall-clock with the numba kernels compiled up front.
"""

import time

import numpy as np
import pytest

from lipapprox.cli import main as cli_main
from lipapprox.data import builtin_field, case1_reference, case2_reference
from lipapprox.envelope import (
    brute_force_envelopes,
    cone_representation_error,
    lower_envelope,
    upper_envelope,
)
from lipapprox.grid import ScalarField, build_grid, interval
from lipapprox.lip1d import project_lip_1d
from lipapprox.metric import ANISOTROPY_8, all_pairs_distance, label_setting
from lipapprox.plap import minimize_p, p_sweep
from lipapprox.projector import max_violation, project_lip_graph
from lipapprox.sbv1d import minimize_sbv_1d, threshold_scan
from lipapprox.viscosity import (
    boundary_condition_check,
    combined_residual,
    eikonal_residual,
    regions,
)

TRIALS = 1000


@pytest.fixture(scope="module", autouse=True)
def compiled():
    """Compile every jitted kernel so timings measure the solvers only."""
    f = builtin_field("case1", 21)
    project_lip_1d(f)
    project_lip_graph(f)
    label_setting(f.grid, f.values)
    minimize_p(f, 4.0)
    minimize_sbv_1d(f)
    minimize_sbv_1d(f, r=1)
    g = builtin_field("radial", 9)
    project_lip_graph(g)
    label_setting(g.grid, g.values)


def clock(fn, *args, **kwargs):
    t = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t


def test_criterion_01_case1_golden(record):
    f = builtin_field("case1", 2001, k=1.0, r0=0.4)
    h = f.grid.h[0]
    u, dt = clock(project_lip_1d, f)
    err = float(np.max(np.abs(u.values - case1_reference(f.x, 1.0, 0.4))))
    energy = 0.5 * (u - f).l2() ** 2
    checks = {
        "linf<=2h": err <= 2 * h,
        "energy 1/12 within 1%": abs(energy - 1 / 12) <= 0.01 / 12,
        "runtime<1s": dt < 1.0,
    }
    ok = record("1 Case 1 golden", checks,
                f"linf={err:.3g} (2h={2 * h:.3g}) energy={energy:.6f} (1/12={1 / 12:.6f}) t={dt:.3f}s")
    assert ok


def test_criterion_02_case2_golden(record):
    f = builtin_field("case2", 2001)
    h = f.grid.h[0]
    u, dt = clock(project_lip_1d, f)
    err = float(np.max(np.abs(u.values - case2_reference(f.x))))
    checks = {"linf<=2h": err <= 2 * h, "runtime<1s": dt < 1.0}
    assert record("2 Case 2 golden", checks, f"linf={err:.3g} (2h={2 * h:.3g}) t={dt:.3f}s")


def test_criterion_03_case3_golden(record):
    f = builtin_field("case3", 4001)
    h = f.grid.h[0]
    u = project_lip_1d(f)
    x = f.x
    centre = int(np.argmin(np.abs(x)))
    u0 = float(u.values[centre])
    # the cone has slope exactly 1; the contact branch sqrt(x) is flatter
    slope = np.diff(u.values) / h
    right = np.flatnonzero((x[:-1] >= 0) & (slope < 1 - 1e-6))
    kink = float(x[right[0]])
    checks = {"u(0)=2/9 within 2h": abs(u0 - 2 / 9) <= 2 * h,
              "kink=4/9 within 3h": abs(kink - 4 / 9) <= 3 * h}
    assert record("3 Case 3 golden", checks,
                  f"u(0)={u0:.6f} (2/9={2 / 9:.6f}) kink={kink:.5f} (4/9={4 / 9:.5f}) h={h:.2g}")


def test_criterion_04_p_sweep(record):
    f = builtin_field("case2", 401)
    rep, dt = clock(p_sweep, f, (4, 8, 16, 32, 64))
    d = rep.sup_distances
    est = rep.check_estimates(slack=0.1)
    checks = {
        "p=64 closer than p=4": d[-1] < d[0],
        "final<=0.05": d[-1] <= 0.05,
        "l2 estimate": est["l2"],
        "gradient estimate": est["gradient"],
        "converged": all(r.converged for r in rep.rows),
        "runtime<30s": dt < 30.0,
    }
    dist = ", ".join(f"{v:.4f}" for v in d)
    assert record("4 p-sweep", checks, f"sup-distances [{dist}] t={dt:.2f}s")


def test_criterion_05_representation(record):
    t = time.perf_counter()
    errs, checks = [], {}
    for name in ("case1", "case2"):
        f = builtin_field(name, 2001)
        u = project_lip_1d(f)
        h = f.grid.h[0]
        for sign, tag in ((1, "A+"), (-1, "A-")):
            err, size = cone_representation_error(u, f, sign)
            checks[f"{name} {tag}"] = size > 0 and err <= 3 * h
            errs.append(f"{name} {tag}={err:.2g}")
    f = builtin_field("radial", 81, k=1.0, r0=0.4)
    u, cert = project_lip_graph(f)
    h = f.grid.hmax
    slack = 3 * h + ANISOTROPY_8 * 2.0
    for sign, tag in ((1, "A+"), (-1, "A-")):
        err, size = cone_representation_error(u, f, sign)
        checks[f"radial {tag}"] = size > 0 and err <= slack
        errs.append(f"radial {tag}={err:.2g}")
    dt = time.perf_counter() - t
    checks["radial converged"] = cert.converged
    checks["runtime<2min"] = dt < 120.0
    assert record("5 representation formulas", checks, " ".join(errs) + f" t={dt:.1f}s")


def _eikonal(n):
    f = builtin_field("case2", n)
    u = project_lip_1d(f)
    rep = regions(u, f)
    eik = eikonal_residual(u, rep)
    return f, u, rep, eik, max(eik["plus"]["max"], eik["minus"]["max"])


def test_criterion_06_eikonal_and_boundary(record):
    f, u, rep, eik, coarse = _eikonal(401)
    *_, fine = _eikonal(801)
    h = f.grid.h[0]
    # both residuals at roundoff level count as converged
    floor = 1e-10
    improved = coarse / fine >= 1.2 if fine > 0 else True
    bc = boundary_condition_check(u, f, rep, slack=3 * h)
    comb = combined_residual(u, rep)
    checks = {
        "eikonal<=0.1": coarse <= 0.1,
        "factor>=1.2 or at noise floor": improved or max(coarse, fine) <= floor,
        "boundary (slack 3h)": bc.passed,
        "combined<=eikonal+5h": max(comb["plus_excess"], comb["minus_excess"]) <= 5 * h,
        "regions nonempty": eik["plus"]["count"] > 0 and eik["minus"]["count"] > 0,
    }
    assert record("6 eikonal + boundary", checks,
                  f"eikonal n=401 {coarse:.2g}, n=801 {fine:.2g}; boundary "
                  f"{'ok' if bc.passed else 'violated'}; combined excess "
                  f"{max(comb['plus_excess'], comb['minus_excess']):.2g}")


def test_criterion_07_obstacle(record, rng):
    f = builtin_field("case2", 101)
    h = f.grid.h[0]
    up = upper_envelope(f)
    bup, blo = brute_force_envelopes(f)
    err = float(np.max(np.abs(up.values - (1 + np.abs(f.x)))))
    agree = max(float(np.max(np.abs(up.values - bup.values))),
                float(np.max(np.abs(lower_envelope(f).values - blo.values))))
    worst = 0.0
    g = interval(101)
    for _ in range(50):
        v = ScalarField(g, rng.normal(size=101) * rng.uniform(0.1, 3.0))
        p = project_lip_1d(v).values
        worst = max(worst, float(np.max(lower_envelope(v).values - p)),
                    float(np.max(p - upper_envelope(v).values)))
    checks = {"upper=1+|x| within 2h": err <= 2 * h,
              "brute force agrees 1e-12": agree <= 1e-12,
              "ordering on 50 data": worst <= 1e-12}
    assert record("7 obstacle solutions", checks,
                  f"envelope err={err:.2g} brute-force diff={agree:.1g} ordering excess={worst:.1g}")


def test_criterion_08_sbv_threshold(record):
    t = time.perf_counter()
    n = 801
    low = minimize_sbv_1d(builtin_field("case1", n, k=2.5, r0=0.5))
    high = minimize_sbv_1d(builtin_field("case1", n, k=3.5, r0=0.5))
    h = high.f.grid.h[0]
    ks = np.round(np.arange(2.0, 4.0 + 1e-9, 0.05), 10)
    nj, _, kstar = threshold_scan(ks, n=n, half_width=0.5)
    dt = time.perf_counter() - t
    target = 2.5**3 / 12
    checks = {
        "k=2.5: no jumps": low.njumps == 0,
        "k=2.5: energy within 1% of k^3/12": abs(low.energy - target) <= 0.01 * target,
        "k=3.5: two jumps": high.njumps == 2,
        "k=3.5: energy 2": abs(high.energy - 2.0) <= h,
        "|k*^3-24|<=10%": abs(kstar**3 - 24) <= 2.4,
        "runtime<2min": dt < 120.0,
    }
    assert record("8 SBV threshold", checks,
                  f"k=2.5 E={low.energy:.4f} (k^3/12={target:.4f}) jumps={low.njumps}; "
                  f"k=3.5 E={high.energy:.4f} jumps={high.njumps}; k*={kstar:.2f} "
                  f"k*^3={kstar**3:.1f}; t={dt:.1f}s")


def _random_datum(rng, grid):
    kind = rng.integers(4)
    x = grid.coords
    scale = rng.uniform(0.1, 5.0)
    if kind == 0:
        v = rng.normal(size=grid.num_nodes)
    elif kind == 1:
        v = (x[:, 0] > rng.uniform(-0.8, 0.8)).astype(float)
    elif kind == 2:
        v = np.sin(rng.uniform(1, 15) * x[:, 0]) + (x[:, -1] ** 2 if grid.dim == 2 else 0)
    else:
        v = np.abs(x).sum(axis=1) * rng.uniform(1, 4)
    return ScalarField(grid, scale * v + rng.uniform(-2, 2))


def _random_grid(rng):
    if rng.random() < 0.6:
        return interval(int(rng.integers(3, 102)), *sorted(rng.uniform(-3, 3, 2) + [0, 0.5]))
    mask = ["full", "lshape", ("disk", (0.0, 0.0), 1.0)][rng.integers(3)]
    n = int(rng.integers(4, 11))
    return build_grid(2, (-1.0, 1.0), n, mask, stencil=int(rng.choice([8, 16])))


def _project(f):
    if f.grid.dim == 1:
        return project_lip_1d(f)
    return project_lip_graph(f, tol_feas=1e-11, tol_inc=1e-13)[0]


def test_criterion_09_property_suites(record, rng):
    idem = nonexp = mean = dp_dyk = 0.0
    for _ in range(TRIALS):
        grid = _random_grid(rng)
        f = _random_datum(rng, grid)
        g = _random_datum(rng, grid)
        pf, pg = _project(f), _project(g)
        idem = max(idem, float(np.max(np.abs(_project(pf).values - pf.values))))
        nonexp = max(nonexp, (pf - pg).l2() - (f - g).l2())
        mean = max(mean, abs(pf.integral() - f.integral()) / max(f.l1(), 1e-300))
    for _ in range(TRIALS):
        grid = interval(int(rng.integers(3, 41)))
        f = _random_datum(rng, grid)
        dyk, _ = project_lip_graph(f, tol_feas=1e-12, tol_inc=1e-14)
        dp_dyk = max(dp_dyk, float(np.max(np.abs(dyk.values - project_lip_1d(f).values))))

    triangle = 0
    cache = {}
    for _ in range(TRIALS):
        n = int(rng.integers(3, 13))
        mask = ["full", "lshape", ("disk", (0.0, 0.0), 1.0)][rng.integers(3)]
        stencil = int(rng.choice([8, 16]))
        key = (n, str(mask), stencil)
        if key not in cache:
            cache[key] = all_pairs_distance(build_grid(2, (-1.0, 1.0), n, mask, stencil))
        D = cache[key]
        i, j, k = rng.integers(D.shape[0], size=(3, 500))
        triangle += int(np.count_nonzero(D[i, k] > D[i, j] + D[j, k]))

    minimality = 0.0
    for _ in range(TRIALS):
        grid = _random_grid(rng)
        f = _random_datum(rng, grid)
        up = upper_envelope(f).values
        # majorants: envelopes of raised data and cones pinned above f
        g1 = upper_envelope(f + np.abs(rng.normal(size=grid.num_nodes))).values
        src = int(rng.integers(grid.num_nodes))
        lab = np.full(grid.num_nodes, np.inf)
        lab[src] = 0.0
        d = label_setting(grid, lab)
        g2 = np.max(f.values - d) + d
        for g_ in (g1, g2, np.maximum(g1, g2)):
            assert np.all(g_ >= f.values - 1e-12 * (1 + np.abs(f.values)))
            minimality = max(minimality, float(np.max(up - g_)))
        assert max_violation(grid, up) <= 1e-12 * (1 + np.abs(up).max())

    checks = {
        "idempotence<=1e-8": idem <= 1e-8,
        "nonexpansive": nonexp <= 1e-8,
        "mean<=1e-6|f|_1": mean <= 1e-6,
        "DP vs Dykstra<=1e-6": dp_dyk <= 1e-6,
        "triangle exact": triangle == 0,
        "envelope minimal": minimality <= 1e-12,
    }
    assert record("9 property suites", checks,
                  f"{TRIALS} trials each: idem={idem:.1g} nonexp excess={nonexp:.1g} "
                  f"mean={mean:.1g} dp-dykstra={dp_dyk:.1g} triangle violations={triangle} "
                  f"minimality excess={minimality:.1g}")


COMMANDS = [
    ["project", "--case", "3", "--n", "201"],
    ["project", "--case", "radial", "--n", "21", "--format", "json"],
    ["plap-sweep", "--case", "2", "--n", "101", "--ps", "4,8,16"],
    ["envelope", "--case", "2", "--n", "101"],
    ["verify", "--case", "1", "--n", "401"],
    ["verify", "--case", "radial", "--n", "21"],
    ["sbv1d", "--case", "1", "--k", "3.5", "--r0", "0.5", "--n", "201"],
    ["sbv1d", "--case", "1", "--k", "3.5", "--r0", "0.5", "--n", "61", "--rexp", "1"],
    ["examples", "--case", "2", "--n", "401"],
]


def test_criterion_10_determinism(record, tmp_path):
    checks = {}
    for idx, args in enumerate(COMMANDS):
        dirs = [tmp_path / f"{idx}-{rep}" for rep in "ab"]
        codes = [cli_main([*args, "--out", str(d)]) for d in dirs]
        files = [sorted(p.name for p in d.iterdir()) for d in dirs]
        same = codes == [0, 0] and files[0] == files[1] and bool(files[0]) and all(
            (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes() for name in files[0]
        )
        checks[" ".join(args[:3])] = same
    assert record("10 determinism", checks, f"{len(COMMANDS)} commands run twice, artifacts compared byte for byte")
