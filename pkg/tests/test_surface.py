import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bqec import SQRT_PI
from bqec.noise import DomainError, NoiseParams, p_err, remainder, trial_rng
from bqec.surface import (
    CSV_COLUMNS,
    MonteCarloResult,
    NoiseState,
    Records,
    SurfaceGkpConfig,
    _ArrayTape,
    build_graph,
    curve_crossing,
    decode_and_score,
    detection_events,
    edge_sigmas,
    edge_weights,
    first_round_variance,
    gkp_round,
    graph_skeleton,
    horizontal_variance,
    layout,
    logical_label,
    monte_carlo,
    normals_per_trial,
    prepare_surface_round,
    read_config,
    reference_flip,
    run_batch,
    run_trial,
    simulate,
    stabilizer_flipped,
    surface_round,
    surface_steps,
    trial_block,
    vertical_coefficients,
    vertical_variance,
    worker_count,
    write_rates_csv,
)

from harness import binomial_z, second_round_variances, single_round_error_counts
from oracles import propagate_surface_covariance

ZERO = NoiseParams(0.0, 0.0)


# ------------------------------------------------------------- layout


def test_d3_step_tables():
    lay = layout(3)
    assert list(lay.z_steps[0]) == [1, 3, 5, 0]
    assert list(lay.x_steps[0]) == [2, 8, 0, 6]


def test_d3_supports_follow_stabilizer_equations():
    lay = layout(3)
    assert lay.support("Z") == [[1, 4], [2, 3, 5, 6], [4, 5, 7, 8], [6, 9]]
    assert lay.support("X") == [[1, 2, 4, 5], [7, 8], [2, 3], [5, 6, 8, 9]]


@pytest.mark.parametrize("d", [3, 5, 7, 9])
def test_layout_structure(d):
    lay = layout(d)
    assert lay.nz == (d * d - 1) // 2 == len(lay.x_plaquettes)
    for typ in ("Z", "X"):
        sizes = sorted(len(s) for s in lay.support(typ))
        assert set(sizes) <= {2, 4}
        assert sizes.count(2) == d - 1
    for t in range(4):
        touched = [k for k in np.concatenate([lay.z_steps[t], lay.x_steps[t]]) if k]
        assert len(touched) == len(set(touched))
    # Z and X supports overlap on an even number of modes, so they commute
    for zs in lay.support("Z"):
        for xs in lay.support("X"):
            assert len(set(zs) & set(xs)) % 2 == 0


def test_layout_rejects_even_distance():
    with pytest.raises(DomainError):
        layout(4)
    with pytest.raises(DomainError):
        SurfaceGkpConfig(2)


# ----------------------------------------------------- variance tables


@pytest.mark.parametrize("d", [3, 5])
def test_tables_match_covariance_propagation(d):
    # unit weights isolate each coefficient
    lay = layout(d)
    for sg, s, pick in ((1.0, 0.0, 0), (0.0, 1.0, 1)):
        cov = propagate_surface_covariance(d, sg, s, rounds=3)
        for k in range(1, d * d + 1):
            for typ, quad in (("Z", "q"), ("X", "p")):
                assert cov[(quad, 3, k)] == pytest.approx(horizontal_variance(d, k, typ, sg, s), abs=1e-10)
                assert cov[(quad, 2, k)] == pytest.approx(cov[(quad, 3, k)], abs=1e-10)
                assert cov[(quad, 1, k)] == pytest.approx(first_round_variance(k, typ, sg, s), abs=1e-10)
        for l in range(1, lay.nz + 1):
            for typ in ("Z", "X"):
                coeff = vertical_coefficients(d, l, typ)[pick] / (3.0 if pick else 1.0)
                assert cov[(typ, 3, l)] == pytest.approx(coeff, abs=1e-10)
                assert cov[(typ, 1, l)] == pytest.approx(cov[(typ, 3, l)], abs=1e-10)


def test_boundary_adjacent_syndrome_is_111_thirds():
    cov = propagate_surface_covariance(3, 0.0, 1.0, rounds=2)
    assert 3 * cov[("Z", 2, 3)] == pytest.approx(111.0, abs=1e-10)
    assert 3 * cov[("X", 2, 4)] == pytest.approx(111.0, abs=1e-10)
    assert vertical_coefficients(3, 3, "Z") == (7, 111)
    assert vertical_coefficients(3, 4, "X") == (7, 111)


def test_edge_sigmas_shape_and_last_row():
    noise = NoiseParams(0.05, 0.1)
    h, v = edge_sigmas(3, noise, "Z", 3)
    # three noisy cycles plus the noiseless one
    assert h.shape == (4, 9) and v.shape == (4,)
    assert h[0, 0] == pytest.approx(math.sqrt(first_round_variance(1, "Z", 0.1, 0.05)))
    # the noiseless round only carries what the first round did not see
    last = horizontal_variance(3, 5, "Z", 0.1, 0.05) - first_round_variance(5, "Z", 0.1, 0.05)
    assert h[-1, 4] == pytest.approx(math.sqrt(last))


def test_second_round_readout_variances_match_tables():
    sg, s = 0.03, 0.02
    q, p, z, x = second_round_variances(3, NoiseParams(s, sg), 10**6, seed=11)
    for k in range(1, 10):
        assert q[k - 1] == pytest.approx(horizontal_variance(3, k, "Z", sg, s), rel=0.01)
        assert p[k - 1] == pytest.approx(horizontal_variance(3, k, "X", sg, s), rel=0.01)
    for l in range(1, 5):
        assert z[l - 1] == pytest.approx(vertical_variance(3, l, "Z", sg, s), rel=0.01)
        assert x[l - 1] == pytest.approx(vertical_variance(3, l, "X", sg, s), rel=0.01)


def test_single_round_rates_match_closed_forms():
    sg, s, n = 0.10, 0.05, 200_000
    pauli, wrong = single_round_error_counts(3, NoiseParams(s, sg), 5, 2, n, seed=5)
    assert abs(binomial_z(pauli, n, p_err(math.sqrt(5 * sg**2 + 59 / 3 * s**2)))) < 3
    assert abs(binomial_z(wrong, n, p_err(math.sqrt(7 * sg**2 + 116 / 3 * s**2)))) < 3


# -------------------------------------------------------- circuit steps


def test_zero_noise_leaves_state_unchanged():
    rng = np.random.default_rng(0)
    st = NoiseState.zeros(5, 3)
    rec = simulate(5, ZERO, 2, rng, 3)
    assert not np.any(rec.gkp_q) and not np.any(rec.z_readout) and not np.any(rec.x_readout)
    assert not np.any(rec.final.dq) and not np.any(rec.final.dp)
    gkp_round(st, ZERO, rng, 1)
    surface_round(st, ZERO, rng)
    assert not np.any(st.dq) and not np.any(st.dp)


def test_just_past_half_cell_becomes_lattice_shift():
    st = NoiseState.zeros(3, 1)
    st.dq[0, 0] = 0.51 * SQRT_PI
    rec = gkp_round(st, ZERO, np.random.default_rng(0), 1)
    assert rec.measured_q[0]
    assert rec.analog[0, 0] == pytest.approx(-0.49 * SQRT_PI, abs=1e-12)
    assert st.dq[0, 0] == pytest.approx(SQRT_PI, abs=1e-12)


def test_gkp_step_rejects_bad_step():
    with pytest.raises(DomainError):
        gkp_round(NoiseState.zeros(3), ZERO, np.random.default_rng(0), 3)


@given(st.integers(3, 7).filter(lambda d: d % 2 == 1), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_x_syndrome_shifts_cancel_on_z_readouts(d, seed):
    rng = np.random.default_rng(seed)
    st = NoiseState.zeros(d, 4)
    prepare_surface_round(st, ZERO, rng)
    st.xq[:] = rng.normal(scale=2.0, size=st.xq.shape)
    st.xp[:] = rng.normal(scale=2.0, size=st.xp.shape)
    lay = layout(d)
    rec = surface_steps(st, ZERO, rng, lay)
    assert np.max(np.abs(rec.z_readout)) <= 1e-12
    # individual data modes move, but every Z-stabilizer sum is untouched
    for ks in lay.support("Z"):
        assert np.max(np.abs(st.dq[:, np.array(ks) - 1].sum(axis=1))) <= 1e-12


@pytest.mark.parametrize("k", range(1, 10))
def test_lattice_shift_flips_adjacent_z_stabilizers(k):
    lay = layout(3)
    st = NoiseState.zeros(3, 1)
    st.dq[0, k - 1] = SQRT_PI
    rec = surface_round(st, ZERO, np.random.default_rng(0), lay)
    expect = [k in s for s in lay.support("Z")]
    assert list(rec.z_flipped[0]) == expect
    assert not rec.x_flipped.any()


def test_stabilizer_flip_reads_mod_two_sqrt_pi():
    vals = np.array([0.0, 0.4, 1.1, 2 * SQRT_PI, 3 * SQRT_PI, -SQRT_PI])
    assert list(stabilizer_flipped(vals)) == [False, False, True, False, True, True]


def test_long_run_stays_bounded():
    noise = NoiseParams(0.02, 0.03)
    rng = np.random.default_rng(21)
    st = NoiseState.zeros(3, 20_000)
    lay = layout(3)
    spread = {}
    for cycle in range(1, 51):
        gkp_round(st, noise, rng, 1)
        gkp_round(st, noise, rng, 2)
        surface_round(st, noise, rng, lay)
        if cycle in (5, 50):
            spread[cycle] = np.var(remainder(st.dq, SQRT_PI))
    assert spread[50] <= 1.10 * spread[5]


# --------------------------------------------------------- determinism


def test_tape_matches_generator():
    d, T, B = 3, 3, 5
    width = normals_per_trial(d, T)
    block = trial_block(7, 0, B, width)
    a = simulate(d, NoiseParams(0.05, 0.1), T, _ArrayTape(block))
    for i in range(B):
        b = simulate(d, NoiseParams(0.05, 0.1), T, trial_rng(7, i), 1)
        assert np.array_equal(a.z_readout[:, i], b.z_readout[:, 0])
        assert np.array_equal(a.gkp_p[:, i], b.gkp_p[:, 0])
        assert np.array_equal(a.final.dq[i], b.final.dq[0])


def test_batch_matches_single_trials():
    cfg = SurfaceGkpConfig(3, NoiseParams(0.0, 0.3), True, None, 3)
    out = run_batch(cfg, 10, 40)
    assert out.labels == [run_trial(cfg, i).label for i in range(10, 40)]
    again = run_trial(cfg, 12, keep_syndrome=True)
    assert again.label == out.labels[2]
    assert again.syndrome["z_events"].shape == (4 * 4,)


def test_monte_carlo_independent_of_chunking_and_workers():
    cfg = SurfaceGkpConfig(3, NoiseParams(0.0, 0.3), True, None, 9)
    a = monte_carlo(cfg, 300, batch_size=300, workers=1)
    b = monte_carlo(cfg, 300, batch_size=70, workers=2)
    assert a.counts == b.counts
    assert sum(a.counts.values()) > 0


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("BQEC_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("BQEC_THREADS", "many")
    with pytest.raises(DomainError):
        worker_count()
    assert worker_count(0) >= 1


# ------------------------------------------------------------ decoding


def test_engines_agree():
    cfg = SurfaceGkpConfig(3, NoiseParams(0.05, 0.2), True, None, 4)
    width = normals_per_trial(3, 3)
    rec = simulate(3, cfg.noise, 3, _ArrayTape(trial_block(4, 0, 60, width)))
    fast = decode_and_score(cfg, rec, "pymatching")
    slow = decode_and_score(cfg, rec, "blossom")
    # degenerate corrections of equal weight may differ in logical class
    assert np.mean(fast.x_fail == slow.x_fail) >= 0.95
    assert np.mean(fast.z_fail == slow.z_fail) >= 0.95
    with pytest.raises(DomainError):
        decode_and_score(cfg, rec, "nope")


def test_engines_agree_on_matching_weight():
    import pymatching

    noise = NoiseParams(0.05, 0.2)
    skel = graph_skeleton(3, "Z", 3)
    rec = simulate(3, noise, 3, np.random.default_rng(8), 40)
    w = edge_weights(3, noise, "Z", 3, True, rec.gkp_q, rec.z_readout)
    events = detection_events(rec.z_readout)
    for b in range(40):
        m = pymatching.Matching.from_check_matrix(skel.check, weights=w[b])
        pred = m.decode(events[b])
        pm_weight = float(np.dot(pred, w[b]))
        _, weight = reference_flip(build_graph(skel, w[b], events[b]))
        assert weight == pytest.approx(pm_weight, rel=1e-6, abs=1e-6)


def test_isolated_bulk_error_is_corrected():
    cfg = SurfaceGkpConfig(3, ZERO, False, 1, 0)
    for typ in ("q", "p"):
        st = NoiseState.zeros(3, 1)
        rec_src = np.random.default_rng(0)
        lay = layout(3)
        # one lattice shift on the centre qubit, then a noisy and an ideal cycle by hand
        getattr(st, "d" + typ)[0, 4] = SQRT_PI
        hq, hp = np.zeros((1, 9)), np.zeros((1, 9))
        for step in (1, 2):
            gkp_round(st, ZERO, rec_src, step)
        s1 = surface_round(st, ZERO, rec_src, lay)
        for step in (1, 2):
            gkp_round(st, ZERO, rec_src, step)
        s2 = surface_round(st, ZERO, rec_src, lay)
        rec = Records(np.stack([hq, hq]), np.stack([hp, hp]), np.stack([s1.z_readout, s2.z_readout]),
                      np.stack([s1.x_readout, s2.x_readout]), st)
        out = decode_and_score(cfg, rec)
        assert out.labels == ["I"]


def test_weights_are_nonnegative_and_capped():
    noise = NoiseParams(0.0, 0.2)
    w = edge_weights(3, noise, "Z", 3, False)
    assert np.all(w >= 0) and np.all(w <= 500)
    # without any noise every edge is impossible
    w0 = edge_weights(3, ZERO, "Z", 3, False)
    assert np.all(w0 == 500)


def test_logical_labels():
    assert [logical_label(a, b) for a, b in [(0, 0), (1, 0), (0, 1), (1, 1)]] == ["I", "X", "Z", "Y"]


def test_analog_beats_digital_at_moderate_noise():
    noise = NoiseParams(0.0, 0.2)
    a = monte_carlo(SurfaceGkpConfig(3, noise, True, None, 1), 2000, workers=1)
    b = monte_carlo(SurfaceGkpConfig(3, noise, False, None, 1), 2000, workers=1)
    assert a.p_x + a.p_y < b.p_x + b.p_y


# ------------------------------------------------------------ helpers


def test_curve_crossing():
    grid = [0.1, 0.2, 0.3]
    assert curve_crossing(grid, [0.1, 0.2, 0.3], [0.05, 0.2, 0.6]) == pytest.approx(0.2)
    x = curve_crossing(grid, [0.1, 0.2, 0.3], [0.05, 0.1, 0.6])
    assert 0.2 < x < 0.3
    assert curve_crossing(grid, [0.1, 0.2, 0.3], [0.05, 0.1, 0.2]) is None
    assert curve_crossing(grid, [0.0, 0.0, 0.0], [0.1, 0.1, 0.1]) is None


def test_read_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# scan\ndistance = 5\nsigma = 0.01  # gate\nuse_analog_info = no\ncase = II\n")
    assert read_config(path) == {"distance": 5, "sigma": 0.01, "use_analog_info": False, "case": "II"}
    for bad in ("distance 5\n", "colour = red\n", "distance = five\n", "use_analog_info = maybe\n"):
        path.write_text(bad)
        with pytest.raises(DomainError):
            read_config(path)


def test_rates_csv(tmp_path):
    res = MonteCarloResult(3, 0.0, 0.2, True, 100, {"X": 3, "Z": 2, "Y": 1}, 1.5)
    path = tmp_path / "rates.csv"
    write_rates_csv([res], path, include_seconds=False)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    row = dict(zip(CSV_COLUMNS, lines[1].split(",")))
    assert row["p_x"] == "0.029999999999999999" and row["seconds"] == "0"
    assert float(row["p_y_err"]) == pytest.approx(math.sqrt(0.01 * 0.99 / 100))
