import dataclasses
import json

import numpy as np
import pytest
from scipy.sparse.linalg import spsolve

from axisym_fbp.grid import StreamGrid, VorticityModel, write_fbg
from axisym_fbp.profiles import BlowupProfile
from axisym_fbp.solver import (
    ConfigError,
    Energy,
    SolveResult,
    SolverConfig,
    assemble_energy,
    boundary_data,
    bundled_configs,
    continuation_schedule,
    free_boundary_distance,
    free_boundary_level,
    free_boundary_points,
    inflow_profile,
    manufactured_solution,
    minimize,
    residual_report,
)

import oracles


def _manufactured(n):
    return SolverConfig(geometry="rectangle", manufactured="smooth", gravity=False,
                        nx=n, ny=n, flux=1.0, y_min=-1.0, y_max=0.0)


def _l2_error(res, cfg):
    psi, _ = manufactured_solution(cfg)
    X, Y = res.grid.mesh()
    return oracles.sample_l2_error(res.grid.values, psi(X, Y), cfg.dx, cfg.dy)


def test_manufactured_solution_second_order():
    errs = [_l2_error(minimize(c), c) for c in map(_manufactured, (16, 32, 64, 128))]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), (errs, orders)


def test_manufactured_source_matches_operator():
    # f* = -div((1/x) grad psi*) / x, checked with centred differences of psi*
    cfg = _manufactured(64)
    psi, f = manufactured_solution(cfg)
    x, y, h = 0.4, -0.3, 1e-4
    xp, xm = x + h / 2, x - h / 2
    div = ((psi(x + h, y) - psi(x, y)) / xp - (psi(x, y) - psi(x - h, y)) / xm) / h**2
    div += (psi(x, y + h) - 2 * psi(x, y) + psi(x, y - h)) / (h * h * x)
    assert -div / x == pytest.approx(f(x, y), rel=1e-5)


def test_gravity_free_solve_is_the_linear_solve():
    cfg = SolverConfig(geometry="rectangle", gravity=False, nx=48, ny=48, flux=0.7)
    res = minimize(cfg)
    en = Energy(cfg)
    vals, fixed = boundary_data(cfg)
    A = en.A.tocsr()
    free = np.flatnonzero(~fixed.ravel())
    cons = np.flatnonzero(fixed.ravel())
    u = vals.ravel().copy()
    u[free] = spsolve(A[free][:, free].tocsc(), -A[free][:, cons] @ u[cons])
    assert np.max(np.abs(u.reshape(vals.shape) - res.grid.values)) <= 1e-10
    # Q (x / x_max)^2 is discretely exact for the edge-midpoint weights
    X, _ = res.grid.mesh()
    assert np.max(np.abs(res.grid.values - 0.7 * X * X)) <= 1e-10


def test_energy_matches_monte_carlo():
    prof = BlowupProfile.stokes(1.0)
    cfg = SolverConfig(geometry="rectangle", x_min=0.5, x_max=1.5, y_min=-0.5, y_max=0.5,
                       nx=512, ny=512, flux=1.0, eps_h=1e-9)
    g = StreamGrid.from_function(prof.values, (0.5, 1.5), (-0.5, 0.5), (513, 513))
    J = assemble_energy(g, cfg)
    rng = np.random.default_rng(oracles.MC_SEED)
    n = oracles.MC_SAMPLES
    x = rng.uniform(0.5, 1.5, n)
    y = rng.uniform(-0.5, 0.5, n)
    v = prof.values(x, y)
    gx, gy = prof.gradients(x, y)
    f = np.where(v > 0, (gx * gx + gy * gy) / x - x * y, 0.0)
    mc, se = f.mean(), f.std() / np.sqrt(n)
    assert abs(J - mc) <= 3 * se + 2e-4 * abs(mc)


def test_energy_gradient_is_exact_derivative():
    cfg = SolverConfig(geometry="tube_bubble", nx=24, ny=24, eps_h=0.05)
    en = Energy(cfg)
    rng = np.random.default_rng(0)
    psi = np.abs(rng.normal(0.2, 0.05, (25, 25)))
    psi[0] = 0
    d = rng.normal(size=psi.shape)
    t = 1e-6
    fd = (en.value(psi + t * d) - en.value(psi - t * d)) / (2 * t)
    assert float(np.sum(en.gradient(psi) * d)) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("name", sorted(bundled_configs()))
def test_bundled_configs_monotone(name):
    cfg = bundled_configs()[name]
    res = minimize(cfg)
    assert res.monotone
    assert res.converged, res.flags
    assert all(s["converged"] for s in res.stages)
    assert np.all(res.grid.values >= 0)


def test_max_principle_without_vorticity():
    cfg = bundled_configs()["tube_bubble"].with_resolution(64)
    psi = minimize(cfg).grid.values
    assert psi.max() <= cfg.Q * (1 + 1e-12)


def test_tube_bubble_has_a_bubble():
    cfg = bundled_configs()["tube_bubble"].with_resolution(64)
    res = minimize(cfg)
    assert res.diagnostics["free_boundary"] == "found"
    pts = np.concatenate(free_boundary_points(res.grid, free_boundary_level(cfg)))
    assert pts[:, 0].max() > 0.3  # the bubble fills a good part of the tube at the bottom
    assert -0.4 < pts[:, 1].max() < 0.0  # nose below the inflow


def test_continuation_shrinks_to_target():
    cfg = bundled_configs()["tube_bubble"]
    sched = continuation_schedule(cfg)
    assert sched[0] == pytest.approx(0.1 * cfg.Q)
    assert sched[-1] == cfg.eps
    assert all(a > b for a, b in zip(sched, sched[1:]))
    assert continuation_schedule(_manufactured(16)) == [_manufactured(16).eps]


def test_band_width_consistency():
    # the front moves less as eps_H shrinks
    base = bundled_configs()["tube_bubble"].with_resolution(64)
    grids = {e: minimize(dataclasses.replace(base, eps_h=e * base.Q)).grid for e in (1e-2, 1e-3, 1e-4)}
    d1 = free_boundary_distance(grids[1e-2], grids[1e-3], 1e-6 * base.Q)
    d2 = free_boundary_distance(grids[1e-3], grids[1e-4], 1e-6 * base.Q)
    assert d2 < d1


def test_threads_do_not_change_results(tmp_path):
    cfg = bundled_configs()["tube_bubble"].with_resolution(64)
    a, b = minimize(cfg, threads=1), minimize(cfg, threads=4)
    write_fbg(tmp_path / "a.fbg", a.grid)
    write_fbg(tmp_path / "b.fbg", b.grid)
    assert (tmp_path / "a.fbg").read_bytes() == (tmp_path / "b.fbg").read_bytes()
    assert a.energy_history == b.energy_history


class TestResidualReport:
    def _exact(self, n):
        prof = BlowupProfile.stokes(1.0)
        cfg = SolverConfig(geometry="rectangle", x_min=0.5, x_max=1.5, y_min=-0.5, y_max=0.5,
                           nx=n, ny=n, flux=1.0, eps_h=1e-9)
        g = StreamGrid.from_function(prof.values, (0.5, 1.5), (-0.5, 0.5), (n + 1, n + 1))
        return residual_report(SolveResult(g, [], [], 0, True), cfg, frozen_x=1.0)

    def test_exact_stokes_profile_meets_bernoulli(self):
        reps = [self._exact(n) for n in (64, 128)]
        med = [r["bernoulli"]["median_abs"] for r in reps]
        assert reps[0]["free_boundary"] == "found"
        assert med[1] < med[0] and med[1] < 0.01

    def test_no_free_boundary_when_all_fluid(self):
        cfg = SolverConfig(geometry="tube_bubble", nx=32, ny=32)
        X, _ = np.meshgrid(*cfg.nodes(), indexing="ij")
        psi = np.where(X > 0, cfg.Q, 0.0)
        g = StreamGrid(psi, 0.0, -1.0, cfg.dx, cfg.dy)
        rep = residual_report(SolveResult(g, [], [], 0, True), cfg)
        assert rep["free_boundary"] == "none"
        assert rep["bernoulli"] is None

    def test_mismatch_decreases_with_resolution(self, tube_bubble_solves):
        med = [tube_bubble_solves[n][1].diagnostics["bernoulli"]["median_abs"] for n in (128, 256)]
        assert med[1] < med[0]


def test_tube_bubble_cauchy(tube_bubble_solves):
    (c1, r1), (_, r2) = tube_bubble_solves[128], tube_bubble_solves[256]
    d = free_boundary_distance(r1.grid, r2.grid, free_boundary_level(c1))
    assert d <= 0.02


class TestConfig:
    def test_round_trip(self):
        for cfg in bundled_configs().values():
            assert SolverConfig.from_dict(json.loads(cfg.dumps())) == cfg

    def test_unknown_key_rejected(self):
        d = bundled_configs()["tube_bubble"].to_dict()
        d["fluxx"] = 1.0
        with pytest.raises(ConfigError, match="unknown"):
            SolverConfig.from_dict(d)

    def test_schema_version_required(self):
        d = bundled_configs()["tube_bubble"].to_dict()
        del d["schema_version"]
        with pytest.raises(ConfigError):
            SolverConfig.from_dict(d)
        d["schema_version"] = 99
        with pytest.raises(ConfigError):
            SolverConfig.from_dict(d)

    @pytest.mark.parametrize("kw", [
        {"geometry": "sphere"},
        {"flux": 0.0},
        {"nx": 4},
        {"x_min": 0.2},
        {"manufactured": "smooth"},
        {"geometry": "rising_jet", "nozzle_radius": 1.5},
        {"inflow": "parabolic"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SolverConfig(**kw)

    def test_vorticity_keys_checked(self):
        d = bundled_configs()["vortical_bubble"].to_dict()
        d["vorticity"]["gamma"] = 1
        with pytest.raises(ConfigError):
            SolverConfig.from_dict(d)
        assert bundled_configs()["vortical_bubble"].vorticity == VorticityModel("constant", 0.5)

    def test_load_rejects_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            SolverConfig.load(p)


def test_inflow_profiles_carry_the_flux():
    for inflow in ("quadratic", "uniform"):
        cfg = SolverConfig(inflow=inflow, flux=0.3)
        xi = np.linspace(0.0, 1.0, 11)
        psi = inflow_profile(cfg, xi)
        assert psi[0] == 0.0 and psi[-1] == pytest.approx(0.3)
        assert np.all(np.diff(psi) > 0)
