import numpy as np
import pytest

from vdsens.dynamics import st_matrices, st_params_from_dt
from vdsens.params import ParamSet, StParams
from vdsens.scenario import FaultEvent, Reference, RefSample, Scenario, circle_scenario, steering_step_scenario
from vdsens.sim import (
    ControllerGains,
    IntegratorConfig,
    SimulationDiverged,
    apply_faults,
    csv_columns,
    read_csv,
    rk4_step,
    run_batch,
    run_scenario,
    tracking_controller,
    write_csv,
)

P = ParamSet()
SP = StParams(v=15.0)
NO_SENS = IntegratorConfig(sensitivity=False)


def _integrate(rhs, x0, h, n):
    x = np.asarray(x0, dtype=float)
    for k in range(n):
        x = rk4_step(rhs, x, None, k * h, h)
    return x


def test_rk4_constant_state():
    assert np.array_equal(_integrate(lambda t, x, u: np.zeros_like(x), [1.5, -2.0], 0.01, 100), [1.5, -2.0])


def test_rk4_fourth_order():
    errs = [abs(_integrate(lambda t, x, u: -x, [1.0], h, int(round(1 / h)))[0] - np.exp(-1.0)) for h in (0.1, 0.05, 0.025)]
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(16.0, rel=0.2)


def test_rk4_quadrature():
    x = _integrate(lambda t, x, u: np.array([np.cos(t)]), [0.0], np.pi / 2000, 1000)
    assert x[0] == pytest.approx(1.0, abs=1e-10)


def test_rk4_rejects_non_finite():
    with pytest.raises(SimulationDiverged):
        rk4_step(lambda t, x, u: np.array([np.inf]), np.array([0.0]), None, 0.0, 0.1)


def test_integrator_config_bounds():
    with pytest.raises(ValueError):
        IntegratorConfig(h=0.02)
    with pytest.raises(ValueError):
        IntegratorConfig(decimation=0)


def test_locked_steering_override():
    fault = FaultEvent(1.0, "fl", "locked-steering", np.deg2rad(30.0))
    u = np.array([0.05, 0.05, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0])
    before, _ = apply_faults(u, [fault], 0.999)
    after, locked = apply_faults(u, [fault], 1.0)
    assert np.array_equal(before, u)
    assert after[0] == pytest.approx(0.5236, abs=1e-4)
    assert np.array_equal(after[1:], u[1:]) and not locked.any()


def test_free_running_and_locked_wheel():
    u = np.full(8, 20.0)
    free, _ = apply_faults(u, [FaultEvent(0.0, "rr", "free-running-wheel")], 0.5)
    assert free[7] == 0.0 and np.all(free[4:7] == 20.0)
    _, locked = apply_faults(u, [FaultEvent(0.0, "rl", "locked-wheel")], 0.5)
    assert locked.tolist() == [False, False, True, False]


def test_controller_feedforward_on_reference():
    ref = RefSample(v=10.0, kappa=0.0, a_x=1.0)
    x = np.zeros(13)
    x[0] = 10.0
    u = tracking_controller(ref, x, ControllerGains(), P)
    assert np.allclose(u[4:], P.m * 1.0 * np.mean(P.r) / 4)
    assert np.all(u[:4] == 0.0)


def test_controller_speed_error_sign():
    x = np.zeros(13)
    x[0] = 9.0
    u = tracking_controller(RefSample(v=10.0, kappa=0.0), x, ControllerGains(), P)
    assert np.all(u[4:] > 0)


def test_controller_tracks_circle():
    run = run_scenario("dt", circle_scenario(50.0, 10.0, 10.0), P, IntegratorConfig(sensitivity=False, decimation=100))
    assert run.state("psi_dot")[-1] == pytest.approx(10.0 / 50.0, rel=0.05)
    assert run.state("v_x")[-1] == pytest.approx(10.0, rel=0.05)


def test_rest_stays_at_rest():
    sc = Scenario("circle", 10.0, Reference.constant(0.0, inputs=np.zeros(8)))
    run = run_scenario("dt", sc, P, IntegratorConfig(sensitivity=False, decimation=1000))
    assert np.max(np.abs(run.x)) <= 1e-9


def test_steering_step_settles_to_steady_gain():
    run = run_scenario("st", steering_step_scenario(15.0, 0.02, 0.5, 10.0), P, NO_SENS, st_params=SP)
    A, B = st_matrices(SP)
    assert np.allclose(run.x[-1], -np.linalg.solve(A, B @ [0.02, 0.0]), rtol=1e-6)
    assert np.all(run.x[run.t < 0.5] == 0.0)


def test_fault_deviation_peaks_after_onset():
    cfg = IntegratorConfig(sensitivity=False, decimation=10)
    base = circle_scenario(100.0, 12.0, 3.0)
    fault = FaultEvent(1.0, "fl", "locked-steering", np.deg2rad(30.0))
    faulted = Scenario("circle", 3.0, base.reference, faults=(fault,))
    a = run_scenario("dt", base, P, cfg)
    b = run_scenario("dt", faulted, P, cfg)
    dev = np.abs(a.state("psi_dot") - b.state("psi_dot"))
    assert np.all(dev[a.t <= 1.0] == 0.0)
    assert a.t[np.argmax(dev)] > 1.0 and dev.max() > 0.01
    assert len(b.fault_log) == 1 and b.fault_log[0]["time"] == pytest.approx(1.0)


def test_deterministic():
    sc = steering_step_scenario(12.0, 0.03, 0.2, 1.0)
    a = run_scenario("st", sc, P, IntegratorConfig(decimation=10))
    b = run_scenario("st", sc, P, IntegratorConfig(decimation=10))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.Z, b.Z)


@pytest.mark.parametrize("model", ["st", "dt"])
def test_sensitivity_does_not_change_states(model):
    sc = circle_scenario(60.0, 10.0, 0.5)
    on = run_scenario(model, sc, P, IntegratorConfig(decimation=10))
    off = run_scenario(model, sc, P, IntegratorConfig(decimation=10, sensitivity=False))
    assert np.array_equal(on.x, off.x)
    assert off.Z is None and np.all(on.Z[0] == 0.0)


def test_decimation_subsamples():
    sc = steering_step_scenario(12.0, 0.03, 0.2, 1.0)
    full = run_scenario("st", sc, P, IntegratorConfig(decimation=1))
    dec = run_scenario("st", sc, P, IntegratorConfig(decimation=10))
    assert np.array_equal(dec.x, full.x[::10]) and np.array_equal(dec.Z, full.Z[::10])
    assert np.array_equal(dec.t, full.t[::10])


def test_step_halving_converges():
    ref = Reference.constant(15.0, inputs=np.array([0.02, 0.0]))
    sc = Scenario("circle", 2.0, ref)
    a = run_scenario("st", sc, P, IntegratorConfig(h=2e-3), st_params=SP)
    b = run_scenario("st", sc, P, IntegratorConfig(h=1e-3), st_params=SP)
    assert np.max(np.abs(a.x[-1] - b.x[-1])) <= 1e-7
    assert np.max(np.abs(a.Z[-1] - b.Z[-1]) / (np.abs(b.Z[-1]) + 1e-12)) <= 1e-7


def test_csv_schema_and_roundtrip(tmp_path):
    run = run_scenario("st", steering_step_scenario(12.0, 0.03, 0.2, 0.5), P, IntegratorConfig(decimation=50))
    path = tmp_path / "run.csv"
    write_csv(run, path)
    header, data = read_csv(path)
    assert header == csv_columns(run)
    assert header[:5] == ["t", "beta", "psi_dot", "delta_f", "delta_r"]
    assert "Z_psi_dot_l_f" in header and len(header) == 5 + 2 * 7
    assert np.array_equal(data[:, 0], run.t)
    assert np.array_equal(data[:, header.index("Z_beta_m")], run.sens("beta", "m"))


def test_batch_preserves_job_order():
    jobs = [(("st", steering_step_scenario(v, 0.02, 0.1, 0.3), P, IntegratorConfig(decimation=100)), {}) for v in (8.0, 12.0, 16.0)]
    seq = run_batch(jobs, workers=1)
    par = run_batch(jobs, workers=2)
    for a, b in zip(seq, par):
        assert np.array_equal(a.x, b.x) and np.array_equal(a.Z, b.Z)
    assert [r.c[-1] for r in par] == [8.0, 12.0, 16.0]


def test_divergence_reports_time():
    steps = []

    def policy(ref, x, h):
        steps.append(1)
        return np.array([np.nan, 0.0]) if len(steps) > 5 else np.zeros(2)

    with pytest.raises(SimulationDiverged) as exc:
        run_scenario("st", circle_scenario(50.0, 10.0, 0.1), P, NO_SENS, controller=policy)
    assert exc.value.last_time == pytest.approx(0.005)


def test_locked_wheel_projection():
    fault = FaultEvent(0.2, "fl", "locked-wheel")
    sc = Scenario("circle", 0.4, Reference.constant(8.0), faults=(fault,))
    run = run_scenario("dt", sc, P, IntegratorConfig(decimation=10))
    after = run.t > 0.2
    assert np.all(run.state("omega_fl")[after] == 0.0)
    assert np.all(run.Z[after, 9, :] == 0.0)
    assert np.all(run.state("omega_fr")[after] > 0.0)


def test_st_rejects_faults():
    sc = Scenario("circle", 1.0, Reference.constant(10.0), faults=(FaultEvent(0.5, 0, "locked-steering", 0.1),))
    with pytest.raises(ValueError):
        run_scenario("st", sc, P)


def test_st_default_params_from_reference_speed():
    run = run_scenario("st", circle_scenario(50.0, 11.0, 0.1), P, NO_SENS)
    assert run.c[-1] == 11.0
    assert np.array_equal(run.c, st_params_from_dt(P, 11.0).to_vector())


def test_initial_state_override():
    x0 = np.array([0.01, 0.05])
    run = run_scenario("st", circle_scenario(50.0, 11.0, 0.1), P, NO_SENS, x0=x0)
    assert np.array_equal(run.x[0], x0) and np.array_equal(run.x0, x0)
    with pytest.raises(ValueError):
        run_scenario("st", circle_scenario(50.0, 11.0, 0.1), P, NO_SENS, x0=np.zeros(3))
