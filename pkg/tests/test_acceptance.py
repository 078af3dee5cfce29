"""Acceptance criteria, one test each, at their stated tolerances and budgets.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from axisym_fbp.blowup import classify
from axisym_fbp.cli import main as cli_main
from axisym_fbp.densities import (
    density_curve,
    extrapolate_limit,
    geometric_radii,
    monotonicity_residual,
    reference_densities,
)
from axisym_fbp.fixtures import row, table_rows
from axisym_fbp.grid import DegeneratePoint, StreamGrid, read_fbg, write_fbg
from axisym_fbp.profiles import (
    STOKES_HI,
    STOKES_LO,
    BlowupProfile,
    laplacian_5pt,
    weighted_divergence,
)
from axisym_fbp.solver import (
    bundled_configs,
    free_boundary_distance,
    free_boundary_level,
    manufactured_solution,
    minimize,
    SolverConfig,
)
from axisym_fbp.special_functions import (
    cone_angle,
    find_theta_star,
    legendre_p,
    legendre_p_prime,
    legendre_p_second,
    wronskian_scaled,
)

import oracles

DATA = Path(__file__).parent / "data"
P1 = DegeneratePoint.type1(1.0)
P2 = DegeneratePoint.type2(-1.0)
P3 = DegeneratePoint.origin()


def _orders(errs):
    e = np.asarray(errs, dtype=float)
    return np.log2(e[:-1] / e[1:])


def _menu(point):
    return {m.label: m.value for m in reference_densities(point)}


def _limit(grid, point, r_min=0.05):
    lim = extrapolate_limit(density_curve(grid, None, point, geometric_radii(0.4, r_min)))
    assert not lim.inconclusive, lim.reason
    return lim.value


def test_criterion_1_legendre_core(criterion):
    with criterion(1, "Legendre core", budget=1.0) as notes:
        cone = find_theta_star(1e-12)
        dp = abs(float(legendre_p_prime(1.5, cone.z_star)))
        assert dp <= 1e-12
        gap = abs(cone.z_star - oracles.legendre_ode_root())
        assert gap <= 1e-8
        worst = 0.0
        for nu in (1.0, 1.5, 2.0):
            z = np.random.default_rng(11).uniform(-0.95, 0.95, 200)
            res = (1 - z * z) * legendre_p_second(nu, z) - 2 * z * legendre_p_prime(nu, z) \
                + nu * (nu + 1) * legendre_p(nu, z)
            worst = max(worst, float(np.max(np.abs(res))))
        assert worst <= 1e-8
        w = np.array([wronskian_scaled(1.5, z) for z in np.linspace(-0.95, 0.95, 41)])
        assert np.ptp(w) <= 1e-8
        notes += [f"|P'(z*)| = {dp:.1e}", f"shooting gap {gap:.1e}", f"ODE residual {worst:.1e}",
                  f"Wronskian spread {np.ptp(w):.1e}"]


def test_criterion_2_profiles(criterion):
    with criterion(2, "profile verification", budget=10.0) as notes:
        steps = (1 / 64, 1 / 128, 1 / 256)
        stokes = BlowupProfile.stokes(1.0)
        errs = []
        for h in steps:
            x = np.arange(0.95 - h, 1.05 + 1.5 * h, h)
            y = np.arange(-0.5 - h, -0.3 + 1.5 * h, h)
            X, Y = np.meshgrid(x, y, indexing="ij")
            errs.append(np.max(np.abs(laplacian_5pt(stokes.values(X, Y), h))))
        o_stokes = _orders(errs)
        assert np.all(o_stokes >= 1.9), errs
        r = np.linspace(0.01, 0.5, 50)
        ratio_dev = 0.0
        for th in (STOKES_LO, STOKES_HI):
            gx, gy = stokes.gradients(1.0 + r * np.sin(th), r * np.cos(th))
            ratio_dev = max(ratio_dev, float(np.max(np.abs((gx * gx + gy * gy) / (-r * np.cos(th)) - 1))))
        assert ratio_dev <= 1e-8

        gar = BlowupProfile.garabedian()
        errs = []
        for h in steps:
            x = np.arange(0.2 - h, 0.4 + 1.5 * h, h)
            y = np.arange(0.1 - h, 0.4 + 1.5 * h, h)
            X, Y = np.meshgrid(x, y, indexing="ij")
            errs.append(np.max(np.abs(weighted_divergence(gar.values(X, Y), x, h))))
        o_gar = _orders(errs)
        assert np.all(o_gar >= 1.9), errs
        ts = cone_angle().theta_star
        r = np.linspace(0.01, 1.0, 60)
        x, y = r * math.sin(ts), r * math.cos(ts)
        gx, gy = gar.gradients(x, y)
        bern = float(np.max(np.abs(gx * gx + gy * gy + x * x * y) / r**3))
        assert bern <= 1e-8

        ax = BlowupProfile.axis(C=1.7, y0=-1.0)
        X, Y = np.meshgrid(np.linspace(0, 1, 11), np.linspace(-2, 0, 11), indexing="ij")
        gx, gy = ax.gradients(X, Y)
        assert np.array_equal(ax.values(X, Y), 1.7 * X * X)
        assert np.array_equal(gx, 3.4 * X) and np.all(gy == 0)
        notes += [f"Stokes orders {np.round(o_stokes, 2).tolist()}", f"ray ratio dev {ratio_dev:.1e}",
                  f"Garabedian orders {np.round(o_gar, 2).tolist()}", f"cone Bernoulli / r^3 {bern:.1e}"]


def test_criterion_3_density_anchors(criterion):
    with criterion(3, "density anchors", budget=60.0) as notes:
        ts = cone_angle().theta_star
        pi = math.pi
        mc = [
            (_menu(P1)["StokesCorner"], oracles.mc_type1_cone(1.0, 2 * pi / 3, 4 * pi / 3)),
            (_menu(P2)["FullHalfDisk"], oracles.mc_type2_full(-1.0)),
            (_menu(P3)["Bubble"], oracles.mc_type3_cone(0.0, ts)),
            (_menu(P3)["FlatUpper"], oracles.mc_type3_cone(0.0, pi / 2)),
            (_menu(P3)["FlatLower"], oracles.mc_type3_cone(pi / 2, pi)),
        ]
        sig = max(abs(v - est) / se for v, (est, se) in mc)
        assert sig <= 3.0

        e_stokes = abs(_limit(row("type1-stokes").grid(2048), P1, 0.0125) - math.sqrt(3) / 3)
        assert e_stokes <= 1e-4
        e_t2 = abs(_limit(row("type2-full-mask").grid(512), P2) - 2 / 3)
        assert e_t2 <= 1e-6
        e_t3 = 0.0
        for key, label in (("type3-bubble", "Bubble"), ("type3-flat-upper", "FlatUpper"),
                           ("type3-flat-lower", "FlatLower"), ("type3-null-cusp", "Null")):
            e_t3 = max(e_t3, abs(_limit(row(key).grid(512), P3) - _menu(P3)[label]))
        assert e_t3 <= 1e-4
        notes += [f"MC max deviation {sig:.2f} sigma", f"Stokes error {e_stokes:.1e}",
                  f"Type 2 error {e_t2:.1e}", f"Type 3 max error {e_t3:.1e}"]


MONO_CASES = [
    (BlowupProfile.stokes(1.0), P1, (0.5, 1.5), (-0.5, 0.5)),
    (BlowupProfile.axis(1.0, -1.0), P2, (0.0, 0.5), (-1.5, -0.5)),
    (BlowupProfile.garabedian(), P3, (0.0, 0.5), (-0.5, 0.5)),
]
# a residual at this size is roundoff, with no discretization error left to shrink
ROUNDOFF = 1e-10


def test_criterion_4_monotonicity(criterion):
    with criterion(4, "monotonicity identities", budget=120.0) as notes:
        for prof, point, xr, yr in MONO_CASES:
            worst = []
            for n in (512, 1024):
                shape = (int(round((xr[1] - xr[0]) * n)) + 1, int(round((yr[1] - yr[0]) * n)) + 1)
                g = StreamGrid.from_function(prof.values, xr, yr, shape)
                rep = monotonicity_residual(g, None, point, [0.3, 0.2, 0.1])
                worst.append(float(np.max(rep.relative_residual)))
            assert worst[1] <= 1e-3
            assert worst[1] < worst[0] or worst[1] <= ROUNDOFF, worst
            notes.append(f"{point.kind.value} {worst[0]:.1e} -> {worst[1]:.1e}")


def test_criterion_5_truth_table(criterion):
    with criterion(5, "classifier truth table", budget=120.0) as notes:
        rows = table_rows()
        wrong = []
        for eps in (0.0, 0.1):
            for r in rows:
                c = classify(r.grid(512, eps), None, r.point)
                if c.label != r.label:
                    wrong.append((r.key, eps, c.label))
        assert not wrong, wrong
        c = classify(row("type1-stokes").grid(512), None, P1)
        dev_s = max(abs(abs(t.from_horizontal_deg) - 30.0) for t in c.tangents)
        assert len(c.tangents) == 2 and dev_s <= 1.0
        (t,) = classify(row("type3-bubble").grid(512), None, P3).tangents
        dev_b = abs(t.degrees - cone_angle().degrees)
        assert dev_b <= 1.0
        notes += [f"{2 * len(rows)} rows correct", f"Stokes tangent dev {dev_s:.2f} deg",
                  f"bubble tangent dev {dev_b:.2f} deg"]


def test_criterion_6_solver(criterion, tube_bubble_solves):
    with criterion(6, "solver sanity", budget=600.0, extra_seconds=tube_bubble_solves["seconds"]) as notes:
        errs = []
        for n in (16, 32, 64, 128):
            cfg = SolverConfig(geometry="rectangle", manufactured="smooth", gravity=False,
                               nx=n, ny=n, flux=1.0, y_min=-1.0, y_max=0.0)
            psi, _ = manufactured_solution(cfg)
            res = minimize(cfg)
            X, Y = res.grid.mesh()
            errs.append(oracles.sample_l2_error(res.grid.values, psi(X, Y), cfg.dx, cfg.dy))
        orders = _orders(errs)
        assert np.all(orders >= 1.9), (errs, orders)
        for name, cfg in bundled_configs().items():
            assert minimize(cfg).monotone, name
        (c1, r1), (_, r2) = tube_bubble_solves[128], tube_bubble_solves[256]
        assert r1.monotone and r2.monotone
        d = free_boundary_distance(r1.grid, r2.grid, free_boundary_level(c1))
        assert d <= 0.02
        notes += [f"manufactured orders {np.round(orders, 2).tolist()}",
                  f"{len(bundled_configs())} configs monotone", f"tube_bubble 128/256 distance {d:.4f}"]


def test_criterion_7_determinism_and_formats(criterion, tmp_path, capsys):
    with criterion(7, "determinism and formats", budget=120.0) as notes:
        cfg = tmp_path / "tb.json"
        cfg.write_text(bundled_configs()["tube_bubble"].with_resolution(64).dumps())
        for k in range(2):
            assert cli_main(["solve", "--config", str(cfg), "--out", str(tmp_path / f"s{k}"), "--csv"]) == 0
        for name in ("grid.fbg", "grid.csv", "result.json"):
            assert (tmp_path / "s0" / name).read_bytes() == (tmp_path / "s1" / name).read_bytes(), name
        a = density_curve(row("type1-stokes").grid(256), None, P1, geometric_radii(0.4, 0.1), threads=1)
        b = density_curve(row("type1-stokes").grid(256), None, P1, geometric_radii(0.4, 0.1), threads=4)
        assert np.array_equal(a.values, b.values)

        g = read_fbg(tmp_path / "s0" / "grid.fbg")
        write_fbg(tmp_path / "copy.fbg", g)
        assert (tmp_path / "copy.fbg").read_bytes() == (tmp_path / "s0" / "grid.fbg").read_bytes()
        rng = np.random.default_rng(5)
        h = StreamGrid(rng.random((33, 17)) * 10.0 ** rng.integers(-300, 300, (33, 17)), 0.1, -2.5, 0.3, 0.7)
        write_fbg(tmp_path / "r.fbg", h)
        assert np.array_equal(read_fbg(tmp_path / "r.fbg").values, h.values)

        fixtures = 0
        for argv, expect in (
            (["special", "--eval", "P", "--nu", "1", "--z", "0.25"], lambda d: d["value"] == 0.25),
            (["special", "--eval", "Q1", "--z", "0"], lambda d: d["value"] == -1.0),
            (["special", "--theta-star", "--tol", "1e-12"], lambda d: -1 < d["z_star"] < 0),
        ):
            assert cli_main(argv) == 0
            assert expect(json.loads(capsys.readouterr().out)), argv
            fixtures += 1
        for kind in ("stokes", "axis", "garabedian"):
            out = tmp_path / f"{kind}.csv"
            assert cli_main(["profiles", "--kind", kind, "--samples", "16", "--out", str(out)]) == 0
            assert out.read_bytes() == (DATA / f"profile_{kind}.csv").read_bytes(), kind
            fixtures += 1
        for name, point, label in (("stokes_256.fbg", "type1:x0=1", "Stokes corner"),
                                   ("axis_256.fbg", "type2:y0=-1", "vertical cusp"),
                                   ("bubble_256.fbg", "origin", "Garabedian pointed bubble")):
            out = tmp_path / name
            assert cli_main(["classify", "--grid", str(DATA / name), "--point", point, "--out", str(out)]) == 0
            assert json.loads((out / "classification.json").read_text())["label"] == label
            fixtures += 1
        out = tmp_path / "zero"
        assert cli_main(["analyze", "--grid", str(DATA / "zero_64.fbg"), "--point", "type1:x0=1",
                         "--radii", "0.4:0.25:3", "--out", str(out)]) == 0
        assert all(v == 0.0 for v in json.loads((out / "density_curve.json").read_text())["curve"]["values"])
        fixtures += 1
        capsys.readouterr()
        notes += ["solve reruns byte-identical", "FBG1 round-trip exact", f"{fixtures} CLI fixtures pass"]
