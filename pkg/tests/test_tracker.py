import io
import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import LEVELS, exact_c
from homotrack.homotopy import ListStarts, make_homotopy, random_gamma, total_degree_start
from homotrack.polysys import cyclic_system, parse_system
from homotrack.tracker import (
    HISTORY,
    PathState,
    Status,
    TrackConfig,
    check_status,
    compact,
    growth_exponent,
    lagrange_predict,
    newton_correct,
    next_t,
    predict,
    step_control,
    track_all,
    track_batch,
)
from homotrack.xprec import ExtComplex, Precision


def test_compact_oracle():
    count, scan, job_idx, path_idx, order = compact([0, 1, 0, -1, 0])
    assert count == 3
    assert scan.tolist() == [1, 1, 2, 2, 3]
    assert job_idx.tolist() == [1, 2, 3]
    assert path_idx.tolist() == [0, 2, 4]
    assert order.tolist() == [0, 2, 4, 1, 3]


def test_compact_edge_cases():
    assert compact([1, -1])[0] == 0
    count, scan, _, _, order = compact([0, 0, 0])
    assert count == 3 and scan.tolist() == [1, 2, 3] and order.tolist() == [0, 1, 2]
    assert compact(np.array([], dtype=int))[0] == 0


def test_check_status_rules():
    cfg = TrackConfig()
    t = [1.0, 0.5, 0.5, 0.5, 0.5, 1.0]
    conv = [True, True, False, True, True, False]
    h = [0.1, 0.1, 1e-9, 0.1, 0.1, 0.1]
    xnorm = [1.0, 1e9, 1.0, 1.0, 1.0, 1.0]
    steps = [5, 5, 5, 5, 10_001, 5]
    status, notes = check_status(t, conv, h, xnorm, steps, cfg)
    assert status.tolist() == [1, -1, -1, 0, -1, 0]
    assert notes.tolist() == ["", "diverged", "step size underflow", "", "step limit", ""]
    # a stalled path whose norm grows is reported as diverged
    status, notes = check_status(t, conv, h, xnorm, steps, cfg, growth=[0, 0, 0.5, 0, 0.05, 0])
    assert notes.tolist() == ["", "diverged", "diverged", "", "step limit", ""]


def test_next_t_lands_exactly_on_one():
    assert next_t([0.0, 0.95, 0.97], [0.05, 0.05, 0.05]).tolist() == [0.05, 1.0, 1.0]


def test_step_control_accept_expand_reject_underflow():
    cfg = TrackConfig(h_init=0.04, h_max=0.1)
    x0 = ExtComplex.from_complex(np.array([1.0]))
    p = PathState.start(x0, cfg.h_init)
    x1 = ExtComplex.from_complex(np.array([1.1]))
    step_control(p, True, x1, 0.04, cfg)
    assert (p.t, p.h, p.steps) == (0.04, 0.04, 1)
    step_control(p, True, x1, 0.08, cfg)
    assert p.h == pytest.approx(0.06) and p.hist_t == [0.08, 0.04, 0.0]
    for k in range(10):
        step_control(p, True, x1, 0.1 + 0.01 * k, cfg)
    assert p.h == 0.1 and len(p.hist_t) == HISTORY
    before = p.x.to_complex().copy()
    step_control(p, False, None, 0.9, cfg)
    assert p.h == 0.05 and p.rejections == 1 and np.array_equal(p.x.to_complex(), before)
    while p.status == Status.ACTIVE:
        step_control(p, False, None, 0.9, cfg)
    assert p.status == Status.FAILED and p.annotation == "step size underflow"
    with pytest.raises(ValueError):
        step_control(p, True, x1, 0.9, cfg)


@pytest.mark.parametrize("prec", LEVELS)
def test_lagrange_is_exact_on_low_degree_paths(prec):
    # x(t) = 1 + 2t - 3t^2 + t^3 + 0.5 t^4 is reproduced from five samples
    coeffs = [1, 2, -3, 1, Fraction(1, 2)]

    def x_of(t):
        return sum(c * Fraction(t) ** k for k, c in enumerate(coeffs))

    ts = [0.5, 0.375, 0.25, 0.125, 0.0]
    hist_t = np.array(ts)[:, None]
    vals = np.array([x_of(t) for t in ts], dtype=object)[:, None, None]
    hist_x = ExtComplex.from_parts(vals, np.zeros_like(vals), prec)
    got = lagrange_predict(hist_t, hist_x, np.array([5]), 0.625)
    want = x_of(0.625)
    err = abs(exact_c(got)[0][0] - want) / abs(want)
    assert err <= 64 * Fraction(prec.eps)
    # fewer samples: linear extrapolation through the two newest
    got2 = lagrange_predict(hist_t, hist_x, np.array([2]), 0.625)
    lin = x_of(0.5) + (x_of(0.5) - x_of(0.375))
    assert abs(exact_c(got2)[0][0] - lin) <= 64 * Fraction(prec.eps)


def test_predict_single_path():
    p = PathState.start(ExtComplex.from_complex(np.array([2.0 + 1j])))
    assert complex(predict(p, 0.1)[0]) == 2 + 1j
    with pytest.raises(ValueError):
        predict(p, 0.0)


def test_growth_exponent():
    ts = np.array([0.99, 0.98, 0.96, 0.9, 0.8])[:, None]
    diverging = ExtComplex.from_complex((1 / (1 - ts))[:, None, :])
    assert growth_exponent(ts, diverging, np.array([5]))[0] == pytest.approx(1.0)
    finite = ExtComplex.from_complex((2 + (1 - ts))[:, None, :])
    assert abs(growth_exponent(ts, finite, np.array([5]))[0]) < 0.1
    assert np.isnan(growth_exponent(ts, finite, np.array([1]))[0])


def _constant_homotopy(prec):
    f = parse_system("1\nx0^2 - 4;")
    return make_homotopy(f, f, 1.0, prec)


def test_newton_schedule_three_one_two():
    h = _constant_homotopy("d")
    cfg = TrackConfig()
    x = ExtComplex.from_complex(np.array([[2.01, 2.0, 2.00001]]))
    res = newton_correct(h.plan, h.gamma, x, 1.0, cfg)
    assert res.iterations.tolist() == [3, 1, 2]
    assert res.converged.all()
    assert res.rounds == 3 == res.iterations.max()
    assert res.trace.astype(int).tolist() == [[1, 1, 1], [1, 0, 1], [1, 0, 0]]
    np.testing.assert_allclose(res.x.to_complex(), 2.0, atol=1e-12)


def test_newton_schedule_is_independent_of_batch_mates():
    h = _constant_homotopy("dd")
    cfg = TrackConfig(prec="dd")
    x = ExtComplex.from_complex(np.array([[2.01, 2.0, 2.00001]]), "dd")
    together = newton_correct(h.plan, h.gamma, x, 1.0, cfg)
    for j in range(3):
        alone = newton_correct(h.plan, h.gamma, x[:, j : j + 1], 1.0, cfg)
        assert alone.iterations[0] == together.iterations[j]
        assert np.array_equal(alone.x.re.limbs[:, 0], together.x.re.limbs[:, j])


def test_newton_flags_singular_jacobian():
    h = _constant_homotopy("d")
    x = ExtComplex.from_complex(np.array([[0.0, 3.0]]))
    res = newton_correct(h.plan, h.gamma, x, 1.0, TrackConfig())
    assert res.singular.tolist() == [True, False]
    assert not res.converged[0] and res.iterations[0] == 1


@pytest.mark.parametrize("prec, tol", [("d", 1e-12), ("dd", 1e-24), ("qd", 1e-24)])
def test_closed_form_quadratic(prec, tol):
    f = parse_system("1\nx0^2 - 4;")
    g, starts = total_degree_start(f, prec)
    h = make_homotopy(f, g, 1.0, prec)
    sols = track_all(h, starts, TrackConfig(prec=prec))
    assert sols.success.all()
    np.testing.assert_allclose(sorted(sols.endpoints.to_complex()[0].real), [-2, 2], atol=1e-12)
    assert sols.residual.max() < tol
    for r in sols:
        assert abs(r.x.to_complex()[0].imag) < 1e-12 and r.steps > 0 and r.wall_time >= 0


def test_diverging_path_is_annotated():
    # Bezout count 2, one finite solution (1, 1)
    f = parse_system("2\nx0*x1 - 1;\nx0 - 1;")
    g, starts = total_degree_start(f)
    h = make_homotopy(f, g, random_gamma(3))
    sols = track_all(h, starts)
    assert sorted(s.name for s in map(Status, sols.status)) == ["FAILED", "SUCCESS"]
    ok = sols.success
    np.testing.assert_allclose(sols.endpoints.to_complex()[:, ok][:, 0], [1, 1], atol=1e-10)
    assert sols.annotation[~ok].tolist() == ["diverged"]


def _cyclic3(prec="d", seed=11):
    f = cyclic_system(3)
    g, starts = total_degree_start(f, prec)
    return make_homotopy(f, g, random_gamma(seed, prec)), starts


def test_results_do_not_depend_on_batch_width_or_workers():
    h, starts = _cyclic3()
    ref = track_all(h, starts, TrackConfig(batch_size=6))
    for width, workers in [(1, 1), (4, 1), (6, 2)]:
        out = track_all(h, starts, TrackConfig(batch_size=width, workers=workers))
        assert np.array_equal(out.endpoints.re.limbs, ref.endpoints.re.limbs)
        assert np.array_equal(out.endpoints.im.limbs, ref.endpoints.im.limbs)
        assert np.array_equal(out.status, ref.status)
        assert np.array_equal(out.steps, ref.steps)


def test_cyclic3_solutions_satisfy_system():
    h, starts = _cyclic3("dd")
    sols = track_all(h, starts)
    assert len(sols) == 6
    assert sols.counts()["success"] == 6
    assert sols.residual.max() < 1e-20


def test_subset_of_indices_and_stream_records():
    h, starts = _cyclic3()
    stream = io.StringIO()
    sols = track_all(h, starts, indices=[1, 4], stream=stream)
    assert sols.start_index.tolist() == [1, 4]
    records = [json.loads(line) for line in stream.getvalue().splitlines()]
    assert records and set(records[0]) == {"path", "t", "h", "newton", "status"}
    assert {r["path"] for r in records} == {1, 4}
    final = {r["path"]: r for r in records}
    assert all(final[p]["status"] == 1 and final[p]["t"] == 1.0 for p in (1, 4))


def test_track_batch_rounds_reported():
    h, starts = _cyclic3()
    out = track_batch(h, starts.all(), np.arange(6), TrackConfig())
    assert len(out.batch_rounds) == 1 and out.batch_rounds[0] >= out.newton_iterations.max()


def test_list_starts_and_precision_checks():
    h, starts = _cyclic3()
    listed = ListStarts(starts.take([0, 2]))
    out = track_all(h, listed)
    assert len(out) == 2
    with pytest.raises(ValueError):
        track_all(h, ListStarts(starts.take([0]).__class__.zeros((3, 1), "dd")))
    with pytest.raises(ValueError):
        track_all(h, starts, indices=[])


@pytest.mark.parametrize(
    "kwargs",
    [{"h_min": 0.2}, {"h_init": 0.2}, {"max_newton": 0}, {"residual_tol": 0}, {"contract": 1.0}, {"batch_size": 0}],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrackConfig(**kwargs)


def test_config_defaults_per_level():
    assert [TrackConfig(prec=p).residual_tol for p in LEVELS] == [1e-8, 1e-14, 1e-28]
    assert TrackConfig(prec="qd").h_min == 1e-8 and TrackConfig().h_min == 1e-6
    assert TrackConfig(prec=Precision.DD, residual_tol=1e-20).residual_tol == 1e-20
