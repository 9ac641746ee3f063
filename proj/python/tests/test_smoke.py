import json

import numpy as np
import pytest

import phaseopt as po


def default_problem(n=32, steps=64):
    grid = po.Grid(1, [n], [1.0])
    tgrid = po.TimeGrid(1.0, steps)
    x = grid.centers()[:, 0]
    data = po.ProblemData()
    data.epsilon, data.delta, data.beta1, data.beta2 = 0.5, 1.0, 1.0, 1e-4
    data.rho0 = 0.5 + 0.2 * np.cos(np.pi * x)
    data.mu0 = np.full(n, 0.1)
    data.rho_T = 0.5 + 0.1 * np.cos(2 * np.pi * x)
    data.mu_T = np.full((tgrid.levels, n), 0.2)
    data.U = np.ones((tgrid.levels, n))
    return grid, tgrid, data


def test_stationary_triple_is_reproduced():
    grid, tgrid, data = default_problem(16, 8)
    data.rho0 = np.full(16, 0.5)
    data.mu0 = np.zeros(16)
    rho, mu, diag = po.solve_state(data, np.zeros((9, 16)), grid, tgrid)
    assert rho.shape == (9, 16)
    assert np.max(np.abs(rho - 0.5)) <= 1e-12
    assert np.max(np.abs(mu)) <= 1e-12
    assert diag["rho_interior"] and diag["mu_nonnegative"]


def test_potential_and_errors():
    pot = po.Potential()
    assert pot(0.5, 1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(po.DomainViolation):
        pot(1.0)
    with pytest.raises(po.UnsupportedDimension):
        po.Grid(3, [2, 2, 2], [1.0, 1.0, 1.0])


def test_discrete_duality_and_gradient():
    grid, tgrid, data = default_problem()
    pot, cfg = po.Potential(), po.SolverConfig()
    u = po.random_control(grid, tgrid, 0.25, 0.75, 1)
    h = po.random_control(grid, tgrid, -1.0, 1.0, 2)
    rho, mu, _ = po.solve_state(data, u, grid, tgrid, pot, cfg)
    xi, eta = po.solve_tangent(rho, mu, h, data, grid, tgrid, pot, cfg)
    p, q = po.solve_adjoint(rho, mu, data, grid, tgrid, pot, cfg)
    assert xi.shape == q.shape == u.shape
    ladder, slope, deriv = po.fd_gradient_check(data, grid, tgrid, pot, cfg, u, h, [1e-1, 1e-2, 1e-3])
    assert 0.8 <= slope <= 1.2
    assert ladder[-1][1] <= 1e-3 * abs(deriv)
    _, rslope = po.tangent_remainder_check(data, grid, tgrid, pot, cfg, u, h, [1e-1, 1e-2, 1e-3])
    assert 1.7 <= rslope <= 2.3


def test_optimize_decreases_cost():
    grid, tgrid, data = default_problem()
    rho, mu, _ = po.solve_state(data, np.full((tgrid.levels, grid.cells), 0.5), grid, tgrid)
    data.rho_T = rho[-1]
    data.mu_T = mu
    opt = po.OptimizerConfig()
    opt.max_iters = 10
    res = po.optimize(data, grid, tgrid, optimizer=opt, u_init=np.zeros((tgrid.levels, grid.cells)))
    J = res["J_history"]
    assert all(b <= a for a, b in zip(J, J[1:]))
    assert J[-1] < J[0]
    assert res["u"].min() >= 0.0 and res["u"].max() <= 1.0


def test_shape_mismatch_is_reported():
    grid, tgrid, data = default_problem(8, 4)
    with pytest.raises(po.PhaseoptError):
        po.solve_state(data, np.zeros((3, 8)), grid, tgrid)


def test_config_and_run_command(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "domain": {"dim": 1, "n": 16, "length": 1.0},
        "time": {"T": 1.0, "N": 16},
        "params": {"epsilon": 0.5, "delta": 1.0},
        "init": {"rho0": {"mean": 0.5, "amplitude": 0.2}},
    }))
    rc = po.parse_config(cfg)
    assert rc.grid.cells == 16 and rc.tgrid.N == 16 and rc.pot.c_log == 0.5
    code, out, err = po.run_command("check", cfg, check="grad", out=tmp_path / "o", seed=4)
    assert code == 0, err
    report = json.loads(out)
    assert report["name"] == "grad" and report["seed"] == 4 and report["pass"]
    assert (tmp_path / "o" / "check_grad.json").exists()

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"domain": {"dim": 1, "n": 4, "length": 1.0}}))
    with pytest.raises(po.MissingKey):
        po.parse_config(bad)
    code, _, err = po.run_command("forward", bad)
    assert code == 2 and "time.T" in err
