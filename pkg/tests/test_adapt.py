import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vemstokes.adapt import (
    HISTORY_COLUMNS,
    AdaptHistory,
    adaptive_loop,
    fit_order,
    mark,
    total_dofs,
)
from vemstokes.estimator import global_estimate
from vemstokes.polymesh import generate, refine
from vemstokes.system import assemble, solve_eigs

# published uniform L-shape sequence; the abscissa is the total DOF count
UNIFORM_N = [1622, 6242, 24482, 96962]
UNIFORM_LAM = [32.7016, 32.3157, 32.1893, 32.1514]
# published adaptive run from the square mesh
SQUARES_N = [1322, 1400, 2166, 3326, 4644, 5900, 9998, 15490, 21032, 29484, 47610]
SQUARES_LAM = [30.6989, 31.0615, 31.5866, 31.6915, 31.9244, 32.0087, 32.0627, 32.0930,
               32.1087, 32.1175, 32.1246]


def test_mark_examples():
    np.testing.assert_array_equal(mark([4, 2, 1.9, 1]), [0, 1])
    np.testing.assert_array_equal(mark(np.ones(5)), np.arange(5))
    assert mark(np.zeros(3)).size == 0
    with pytest.raises(ValueError):
        mark([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=40), st.integers(-20, 20),
       st.floats(0.0, 1.0))
def test_mark_scale_invariant(eta, e, theta):
    eta = np.array(eta)
    s = 2.0**e
    np.testing.assert_array_equal(mark(eta, theta), mark(s * eta, theta))
    if eta.max() > 0:
        assert np.argmax(eta) in mark(eta, theta)


def test_fit_recovers_exact_model():
    h = np.array([1 / 16, 1 / 32, 1 / 64])
    fit = fit_order(h, 10 + 3 * h**2)
    assert fit.rate == pytest.approx(2.0, abs=1e-8)
    assert fit.extrapolated == pytest.approx(10.0, abs=1e-8)
    assert fit.constant == pytest.approx(3.0, rel=1e-6)
    N = np.array([100.0, 400.0, 1600.0, 6400.0])
    fit = fit_order(N, 5 - 2 * N**-1.3, kind="N")
    assert fit.rate == pytest.approx(-1.3, abs=1e-8)
    assert fit.extrapolated == pytest.approx(5.0, abs=1e-10)


def test_fit_published_t1_series():
    fit = fit_order([1 / 16, 1 / 32, 1 / 64], [13.0937, 13.0883, 13.0870])
    assert fit.rate == pytest.approx(2.05, abs=0.01)
    assert fit.extrapolated == pytest.approx(13.0865, abs=1e-4)


def test_fit_published_lshape_slopes():
    uni = fit_order(UNIFORM_N, UNIFORM_LAM, kind="N", reference=32.1321)
    assert uni.rate == pytest.approx(-0.83, abs=0.01)
    ada = fit_order(SQUARES_N, SQUARES_LAM, kind="N", reference=32.1321)
    assert ada.rate == pytest.approx(-1.44, abs=0.01)


def test_fit_is_order_invariant_and_flags_non_monotone():
    x = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    y = 2.0 + 0.7 * x**1.8
    a, b = fit_order(x, y), fit_order(x[::-1], y[::-1])
    assert a.rate == b.rate and a.extrapolated == b.extrapolated
    assert fit_order(x, [2.1, 2.0, 2.05, 2.01]).low_confidence
    with pytest.raises(ValueError):
        fit_order([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_order([1, 1, 2], [1, 2, 3])


def test_history_columns_and_loop_invariants():
    hist = adaptive_loop(generate("lshape", "T1", 4), steps=4, lam_ref=32.1321)
    assert tuple(hist.rows[0]) == HISTORY_COLUMNS
    cells = hist.column("cells")
    assert np.all(np.diff(cells) > 0)
    for c in HISTORY_COLUMNS:
        assert np.all(np.isfinite(hist.column(c)))
    assert hist.rows[0]["dofs"] == total_dofs(generate("lshape", "T1", 4))
    np.testing.assert_allclose(hist.column("eff"), hist.column("err") / hist.column("eta2"))


def test_theta_above_one_stops_after_first_step():
    hist = adaptive_loop(generate("lshape", "T1", 3), steps=5, theta=1 + 1e-9)
    assert len(hist) == 1 and not hist.aborted


def test_theta_zero_is_uniform_refinement():
    mesh = generate("lshape", "T1", 3)
    hist = adaptive_loop(mesh, steps=2, theta=0.0)
    fine = refine(mesh, range(mesh.n_cells))
    lam = solve_eigs(assemble(fine)[1], 1).eigenvalues[0]
    assert hist.rows[1]["cells"] == generate("lshape", "T1", 6).n_cells
    assert hist.rows[1]["lambda1"] == pytest.approx(lam, rel=1e-12)


def test_dof_budget_stops_the_loop():
    mesh = generate("lshape", "T1", 4)
    hist = adaptive_loop(mesh, steps=10, dof_budget=total_dofs(mesh) + 50)
    assert len(hist) <= 2


def test_refinement_failure_returns_partial_history():
    hist = adaptive_loop(generate("square", "T4", 4), steps=3)
    assert len(hist) == 1 and "degenerate" in hist.aborted


def test_step0_marking_concentrates_at_corner():
    mesh = generate("lshape", "T1", 21)
    system = assemble(mesh)[1]
    ind = global_estimate(mesh, system, solve_eigs(system, 1))
    marked = mark(ind.eta_cells)
    near = np.linalg.norm(mesh.centroids[marked], axis=1) < 0.25
    assert near.mean() >= 0.6


def test_history_append_rejects_missing_columns():
    with pytest.raises(KeyError):
        AdaptHistory().append(step=0)


@pytest.mark.xfail(strict=True, reason="our indicator is more concentrated at the corner, so "
                   "early steps mark fewer cells than the published run (see decision log)")
def test_square_start_cell_counts_follow_published_history():
    hist = adaptive_loop(generate("lshape", "T1", 21), steps=4)
    np.testing.assert_allclose(hist.column("cells"), [1322, 1400, 2166, 3326], rtol=0.15)
