import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ciprecoding.ci_geometry import (SymbolDraw, achieved_sinr, ci_margin, draw_symbols,
                                     rotate_full, rotate_partial)

finite = st.floats(-50, 50, allow_nan=False)


def _channels(seed, n=3, u=6, m=4):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, u, m)) + 1j * rng.standard_normal((n, u, m))


def test_symbol_draw_validates_alphabet():
    with pytest.raises(ValueError):
        SymbolDraw([0, 4], 4)
    d = draw_symbols(9, 4, np.random.default_rng(0))
    assert np.all((d.index >= 0) & (d.index < 4))
    assert np.allclose(d.phases, np.pi / 2 * d.index)


def test_rotate_full_equal_symbols_is_identity():
    h = _channels(0)
    eff = rotate_full(h, SymbolDraw(np.full(6, 2), 4))
    assert np.array_equal(eff.h_tilde, h)
    assert eff.mode == "full"


def test_rotate_full_quarter_turn():
    h = _channels(1, u=2)
    eff = rotate_full(h, SymbolDraw([0, 1], 4))
    assert np.allclose(eff.h_tilde[:, 1], -1j * h[:, 1])
    assert np.allclose(eff.h_tilde[:, 0], h[:, 0])


def test_rotate_partial_single_cell_matches_full():
    h = _channels(2, n=1, u=4)
    d = SymbolDraw([1, 3, 0, 2], 4)
    cell = np.zeros(4, int)
    assert np.allclose(rotate_partial(h, d, cell).h_tilde, rotate_full(h, d, cell).h_tilde)


def test_rotate_partial_uses_each_cells_first_user():
    h = _channels(3, u=6)
    d = SymbolDraw([0, 1, 2, 3, 1, 2], 4)
    cell = np.repeat(np.arange(3), 2)
    eff = rotate_partial(h, d, cell)
    ref = d.phases[[0, 0, 2, 2, 4, 4]]
    assert np.allclose(eff.h_tilde, h * np.exp(1j * (ref - d.phases))[:, None])
    assert np.array_equal(rotate_partial(h, SymbolDraw(np.ones(6, int), 4), cell).h_tilde, h)


def test_ci_margin_values():
    sn, g = 0.3, 10.0
    assert ci_margin(sn * np.sqrt(g), np.pi / 4, sn) == pytest.approx(g)
    assert ci_margin(3 + 0.5j, np.pi / 4, 1.0) == pytest.approx(6.25)
    assert ci_margin(0.1 + 5j, np.pi / 4, 1.0) == 0.0


def test_ci_margin_rejects_bad_inputs():
    with pytest.raises(ValueError):
        ci_margin(1.0, np.pi / 2, 1.0)
    with pytest.raises(ValueError):
        ci_margin(1.0, np.pi / 4, 0.0)


def test_zero_precoders_give_zero_sinr():
    h = _channels(4)
    d = SymbolDraw(np.zeros(6, int), 4)
    cell = np.repeat(np.arange(3), 2)
    for mode in ("full", "partial"):
        assert np.all(achieved_sinr(h, np.zeros((3, 4)), d, cell, np.pi / 4, 1.0, mode) == 0)


def test_single_user_matched_precoder_reaches_target():
    h = _channels(5, n=1, u=1)
    sn, g = 1e-3, 100.0
    hv = h[0, 0]
    w = (sn * np.sqrt(g) * hv.conj() / np.vdot(hv, hv).real)[None]
    d = SymbolDraw([3], 4)
    for mode in ("full", "partial"):
        assert achieved_sinr(h, w, d, [0], np.pi / 4, sn, mode)[0] == pytest.approx(g)


def test_partial_mode_counts_other_cells_as_interference():
    h = np.zeros((2, 2, 1), complex)
    h[0, 0, 0] = 1.0
    h[1, 0, 0] = 0.5
    w = np.array([[2.0], [1.0]])
    d = SymbolDraw([0, 0], 4)
    got = achieved_sinr(h, w, d, [0, 1], np.pi / 4, 1.0, "partial")[0]
    assert got == pytest.approx(4.0 / (1.0 + 0.25))
    full = achieved_sinr(h, w, d, [0, 1], np.pi / 4, 1.0, "full")[0]
    assert full == pytest.approx(2.5 ** 2)


def test_achieved_sinr_shape_checks():
    h = _channels(6)
    d = SymbolDraw(np.zeros(6, int), 4)
    with pytest.raises(ValueError):
        achieved_sinr(h, np.zeros((2, 4)), d, np.repeat(np.arange(3), 2), np.pi / 4, 1.0)
    with pytest.raises(ValueError):
        achieved_sinr(h, np.zeros((3, 4)), d, np.repeat(np.arange(3), 2), np.pi / 4, 1.0, "x")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from(["full", "partial"]))
def test_rotation_preserves_norms(seed, mode):
    h = _channels(seed)
    d = draw_symbols(6, 8, np.random.default_rng(seed))
    cell = np.repeat(np.arange(3), 2)
    rot = rotate_full if mode == "full" else rotate_partial
    out = rot(h, d, cell).h_tilde
    assert np.allclose(np.linalg.norm(out, axis=-1), np.linalg.norm(h, axis=-1), rtol=1e-14)


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.floats(0, 5), st.floats(0, 5))
def test_ci_margin_monotone(re, im, d_re, d_im):
    r = re + 1j * im
    assert ci_margin(r + d_re, np.pi / 4, 1.0) >= ci_margin(r, np.pi / 4, 1.0)
    grown = re + 1j * (abs(im) + d_im)
    assert ci_margin(grown, np.pi / 4, 1.0) <= ci_margin(r, np.pi / 4, 1.0)


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.floats(1e-3, 1e3), st.floats(0.05, 1.5))
def test_ci_margin_scale_law(re, im, alpha, theta):
    r = re + 1j * im
    a = ci_margin(alpha * r, theta, alpha * 0.7)
    b = ci_margin(r, theta, 0.7)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0, 2 * np.pi))
def test_full_sinr_invariant_to_common_rotation(seed, phase):
    rng = np.random.default_rng(seed)
    h = _channels(seed)
    w = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
    d = SymbolDraw(np.full(6, int(rng.integers(4))), 4)
    cell = np.repeat(np.arange(3), 2)
    base = achieved_sinr(h, w, d, cell, np.pi / 4, 1.0)
    # rotating every precoder and the channels jointly leaves h^T w unchanged
    rot = np.exp(1j * phase)
    moved = achieved_sinr(h * rot, w / rot, d, cell, np.pi / 4, 1.0)
    assert np.allclose(moved, base, rtol=1e-9, atol=1e-12)
