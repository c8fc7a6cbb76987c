import hashlib

import numpy as np
import pytest

from phasegait.metrics import pearson, segment_strides
from phasegait.phase import S1, S2, S3, S4, S5, PhaseConfig
from phasegait.reference import GaitDataError, eval_constraint, fit_fourier, synthesize_reference
from phasegait.sim import (
    PlantModel,
    Scenario,
    backward_amplitude,
    generate_scenario,
    load_stream,
    load_trace,
    save_stream,
    save_trace,
    simulate,
    stride_amplitudes,
    toe_trajectory,
)

from oracles import first_order_lag

CFG = PhaseConfig()
REF = synthesize_reference(n=150)


def transitions(states):
    return {(int(a), int(b)) for a, b in zip(states[:-1], states[1:]) if a != b}


def test_forward_walk_stream_shape():
    st = generate_scenario(Scenario("forward_walk", cadence_hz=1.0, n_strides=3), REF, CFG)
    assert len(st) == 3000
    assert st.fc.mean() == pytest.approx(0.63, abs=0.002)
    assert np.all(np.diff(st.t) > 0)


def test_weight_shift_dropouts():
    st = generate_scenario(Scenario("weight_shift", n_strides=3), REF, CFG)
    assert np.all(st.q_h_deg == 10.0)
    edges = np.flatnonzero(np.diff(st.fc.astype(int)) != 0)
    runs = np.diff(edges)[::2]
    assert len(runs) == 3 and np.all(runs == 300)


def test_backward_is_time_reversal():
    kw = dict(cadence_hz=1.0, n_strides=4, amplitude=0.8)
    fwd = generate_scenario(Scenario("forward_walk", **kw), REF, CFG)
    bwd = generate_scenario(Scenario("backward_walk", **kw), REF, CFG)
    np.testing.assert_array_equal(bwd.q_h_deg, fwd.q_h_deg[::-1])
    np.testing.assert_array_equal(bwd.fc, fwd.fc[::-1])


def test_backward_amplitude_window():
    a = backward_amplitude(REF, CFG)
    q0 = REF.thigh_deg[0]
    thigh = fit_fourier(REF.thigh_deg)
    assert q0 + a * (REF.thigh_deg.min() - q0) > CFG.q_h51_deg
    assert q0 + a * (eval_constraint(thigh, 0.63) - q0) < CFG.q_h41_deg


def test_seeded_noise_is_reproducible():
    a = generate_scenario(Scenario(noise_deg=0.1, seed=4), REF, CFG)
    b = generate_scenario(Scenario(noise_deg=0.1, seed=4), REF, CFG)
    c = generate_scenario(Scenario(noise_deg=0.1, seed=5), REF, CFG)
    np.testing.assert_array_equal(a.q_h_deg, b.q_h_deg)
    assert not np.array_equal(a.q_h_deg, c.q_h_deg)
    clean = generate_scenario(Scenario(), REF, CFG)
    assert np.max(np.abs(a.q_h_deg - clean.q_h_deg)) <= 0.1


@pytest.mark.parametrize("kw", [dict(kind="run"), dict(cadence_hz=0), dict(n_strides=0),
                                dict(kind="replay"), dict(noise_deg=-1)])
def test_bad_scenarios(kw):
    with pytest.raises(ValueError):
        Scenario(**kw)


def test_replay_missing_file(tmp_path):
    with pytest.raises(GaitDataError):
        generate_scenario(Scenario("replay", replay_path=str(tmp_path / "none.csv")), REF, CFG)


def test_replay_stream_file(tmp_path):
    st = generate_scenario(Scenario(n_strides=2), REF, CFG)
    save_stream(st, tmp_path / "s.csv")
    back = generate_scenario(Scenario("replay", replay_path=str(tmp_path / "s.csv")), REF, CFG)
    np.testing.assert_array_equal(back.q_h_deg, st.q_h_deg)
    np.testing.assert_array_equal(back.fc, st.fc)


def test_replay_malformed(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,q_h_deg,fc\n0.0,1.0,1\n0.001,x,1\n")
    with pytest.raises(GaitDataError, match="malformed"):
        load_stream(p)


def test_replay_rate_mismatch(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("t,q_h_deg,fc\n0.0,1.0,1\n0.01,1.0,1\n")
    with pytest.raises(GaitDataError, match="spacing"):
        generate_scenario(Scenario("replay", replay_path=str(p)), REF, CFG)


def test_forward_walk_single_wrap_per_stride():
    tr = simulate(Scenario(n_strides=5), REF, CFG)
    assert transitions(tr.state) == {(1, 2), (2, 3), (3, 4), (4, 1)}
    wraps = np.flatnonzero(np.diff(tr.s) < -0.5)
    assert len(wraps) == 4
    assert np.all(tr.state[wraps + 1] == S1)


def test_backward_walk_cycles_s4_s5():
    tr = simulate(Scenario("backward_walk", n_strides=6), REF, CFG)
    assert transitions(tr.state) == {(4, 5), (5, 4)}
    assert not np.any(np.isin(tr.state, [S2, S3]))


def test_kick_and_obstacle_run():
    kick = simulate(Scenario("kick", n_strides=2), REF, CFG)
    assert transitions(kick.state) == {(1, 4), (4, 1)}
    obst = simulate(Scenario("obstacle_step", n_strides=2), REF, CFG)
    assert {(2, 3), (3, 4)} <= transitions(obst.state)


def test_perfect_plant_equals_command():
    tr = simulate(Scenario(n_strides=2), REF, CFG)
    np.testing.assert_array_equal(tr.q_knee_plant, tr.q_knee_cmd)
    np.testing.assert_array_equal(tr.q_ankle_plant, tr.q_ankle_cmd)


LAG = PlantModel("first_order_lag", 0.03, 0.03)


def test_lag_plant_matches_oracle():
    tr = simulate(Scenario(n_strides=3), REF, CFG, plant=LAG)
    oracle = first_order_lag(tr.q_knee_cmd.tolist(), CFG.dt, 0.03)
    np.testing.assert_allclose(tr.q_knee_plant, oracle, atol=1e-9)
    stride = slice(1000, 2000)
    assert np.max(np.abs(tr.q_knee_plant - tr.q_knee_cmd)[stride]) > 1.0


@pytest.mark.xfail(strict=True, reason=(
    "swing phase saturates once the thigh passes q_h0, squeezing knee extension "
    "into ~60 ms; a 30 ms lag then tracks it with r = 0.948 at 1 Hz"))
def test_lag_plant_correlation_over_a_stride():
    tr = simulate(Scenario(n_strides=3), REF, CFG, plant=LAG)
    stride = slice(1000, 2000)
    assert pearson(tr.q_knee_cmd[stride], tr.q_knee_plant[stride]) >= 0.95


def test_lag_plant_needs_positive_tau():
    with pytest.raises(ValueError):
        PlantModel("first_order_lag", 0.0, 0.03)


def test_commands_within_constraint_range():
    knee = fit_fourier(REF.knee_deg)
    grid = eval_constraint(knee, np.linspace(0, 1, 400001))
    for kind in ("forward_walk", "backward_walk", "kick", "obstacle_step", "start_stop"):
        tr = simulate(Scenario(kind, n_strides=3, noise_deg=0.1), REF, CFG)
        assert tr.q_knee_cmd.min() >= grid.min() - 1e-6
        assert tr.q_knee_cmd.max() <= grid.max() + 1e-6
        assert np.all((tr.s >= 0) & (tr.s <= 1))


def test_phase_tracks_normalized_time_in_stance():
    tr = simulate(Scenario(n_strides=4), REF, CFG)
    phi = np.mod(np.round(tr.t, 12), 1.0)
    stance = np.isin(tr.state, [S1, S2])
    assert np.max(np.abs(tr.s - phi)[stance]) < 0.1


def test_plantarflexion_grows_with_stride_amplitude():
    sc = Scenario("start_stop", n_strides=8)
    tr = simulate(sc, REF, CFG)
    amps = stride_amplitudes(8)
    rest = int(sc.rest_s / CFG.dt)
    peaks = [-tr.q_ankle_cmd[rest + 1000 * i: rest + 1000 * (i + 1)].min() for i in range(8)]
    order = np.argsort(amps, kind="stable")
    ranked = [peaks[i] for i in order]
    # peaks are sampled, so equal-amplitude strides can differ by a few thousandths
    assert all(b >= a - 0.01 for a, b in zip(ranked, ranked[1:]))
    assert max(peaks) > min(peaks) + 5.0


def test_phase_rate_vanishes_with_thigh_rate():
    tr = simulate(Scenario("weight_shift", n_strides=1), REF, CFG)
    assert np.all(np.diff(tr.s) == 0.0)


def test_toe_geometry():
    x, z = toe_trajectory([0.0], [0.0], [0.0])
    assert x[0] == pytest.approx(0.0, abs=1e-12) and z[0] == pytest.approx(0.0, abs=1e-12)
    x, z = toe_trajectory([0.0], [90.0], [0.0], links=(0.42, 0.43, 1e-12))
    assert x[0] == pytest.approx(-0.43, abs=1e-9)
    assert z[0] == pytest.approx(0.43 + 1e-12, abs=1e-9)
    with pytest.raises(ValueError):
        toe_trajectory([0.0], [0.0], [0.0], links=(0.4, 0.0, 0.1))


def test_toe_depth_below_hip():
    from phasegait.sim import DEFAULT_LINKS
    x, z = toe_trajectory([0.0], [0.0], [0.0])
    hip_height = sum(DEFAULT_LINKS)
    assert hip_height - z[0] == pytest.approx(0.95)


def test_obstacle_toe_clears_85mm():
    tr = simulate(Scenario("obstacle_step", n_strides=3), REF, CFG)
    swing = ~tr.fc
    assert tr.toe_z[swing].max() - 0.085 > 0


def test_trace_round_trip_and_determinism(tmp_path):
    a = simulate(Scenario(n_strides=2, noise_deg=0.1, seed=7), REF, CFG)
    b = simulate(Scenario(n_strides=2, noise_deg=0.1, seed=7), REF, CFG)
    save_trace(a, tmp_path / "a.csv")
    save_trace(b, tmp_path / "b.csv")
    digest = lambda p: hashlib.sha256(p.read_bytes()).hexdigest()
    assert digest(tmp_path / "a.csv") == digest(tmp_path / "b.csv")
    back = load_trace(tmp_path / "a.csv")
    assert len(back) == len(a) == 2000
    np.testing.assert_array_equal(back.state, a.state)
    np.testing.assert_allclose(back.s, a.s, atol=1e-9)
    assert (tmp_path / "a.csv").read_text().splitlines()[0].startswith(
        "t,q_h,fc,state,s,q_knee_cmd,q_ankle_cmd,q_knee_plant,q_ankle_plant,tau_knee,tau_ankle")


def test_trace_strides_detected():
    tr = simulate(Scenario(n_strides=10), REF, CFG)
    assert len(segment_strides(tr.fc, closed_ends=True)) == 10
