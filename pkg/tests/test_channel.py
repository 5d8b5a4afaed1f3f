import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from conftest import (BETA, WAVELENGTH, make_segment, random_chain, segments, small_angles,
                      reference_chain, reference_segments)
from ucaris.channel import (
    ChannelError,
    DegenerateGeometryError,
    build_chain,
    build_segment,
    chain_product,
    circulant_witness,
    epsilon_segment,
    epsilon_total,
    gain_exact,
    overall_channel,
)
from ucaris.geometry import Side, exact_distances


def circulant_from_first_row(row):
    return scipy.linalg.circulant(row).T


def hat_product(chain):
    return chain_product([c.h_hat for c in chain])


class TestGain:
    def test_formula(self):
        d = 4.2
        expected = BETA * WAVELENGTH * np.exp(-2j * math.pi * d / WAVELENGTH) / (4 * math.pi * d)
        assert abs(gain_exact(d, WAVELENGTH, BETA) - expected) < 1e-10 * abs(expected)

    def test_modulus(self):
        assert math.isclose(abs(gain_exact(20.0, WAVELENGTH, BETA)),
                            BETA * WAVELENGTH / (80 * math.pi), rel_tol=1e-14)

    @pytest.mark.parametrize("d", [0.0, -1.0])
    def test_nonpositive_distance(self, d):
        with pytest.raises(DegenerateGeometryError):
            gain_exact(d, WAVELENGTH, BETA)


class TestSegmentChannel:
    @given(segments())
    def test_factored_structure(self, seg):
        ch = build_segment(seg, WAVELENGTH, BETA)
        rebuilt = np.diag(ch.u_left) @ ch.h_tilde @ np.diag(ch.u_right)
        np.testing.assert_allclose(ch.h_approx, rebuilt, rtol=1e-12, atol=0)

    @given(segments())
    def test_compensation_vectors_unit_modulus(self, seg):
        ch = build_segment(seg, WAVELENGTH, BETA)
        assert np.max(np.abs(np.abs(ch.u_left) - 1)) < 1e-13
        assert np.max(np.abs(np.abs(ch.u_right) - 1)) < 1e-13

    @given(segments())
    def test_amplitude_law(self, seg):
        ch = build_segment(seg, WAVELENGTH, BETA)
        for m in (ch.h_tilde, ch.h_hat):
            assert np.max(np.abs(np.abs(m) - abs(ch.prefactor))) < 1e-13 * abs(ch.prefactor)

    @pytest.mark.parametrize("side", list(Side))
    def test_indexing_sink_by_source(self, side):
        seg = make_segment(n=5, side=side, rot_x=0.2)
        ch = build_segment(seg, WAVELENGTH, BETA)
        dist = exact_distances(seg)
        if side is Side.RECEIVE:
            dist = dist.T
        want = BETA * WAVELENGTH * np.exp(-2j * np.pi * dist / WAVELENGTH) / (4 * np.pi * dist)
        np.testing.assert_allclose(ch.h_exact, want, rtol=1e-9)

    def test_approx_tracks_exact(self):
        # phase error of the expansion is second order in the offsets
        for ch in reference_chain(8):
            rel = np.abs(ch.h_approx - ch.h_exact) / np.abs(ch.h_exact)
            assert rel.max() < 0.01

    def test_matrix_kinds(self):
        ch = build_segment(make_segment(n=4, rot_x=0.3), WAVELENGTH, BETA)
        assert ch.matrix("exact") is ch.h_exact
        assert ch.matrix("approx") is ch.h_approx
        np.testing.assert_allclose(ch.matrix("hat"),
                                   ch.u_left[:, None] * ch.h_hat * ch.u_right[None, :])
        with pytest.raises(ValueError):
            ch.matrix("bogus")

    def test_rectangular_hop(self):
        seg = make_segment(n=4)
        seg = type(seg)(seg.source, type(seg.sink)(0.12, 6), 4.2, 0, 0, 0, 0, Side.TRANSMIT)
        ch = build_segment(seg, WAVELENGTH, BETA)
        assert ch.shape == (6, 4)
        assert np.all(np.isfinite(ch.h_exact))

    def test_degenerate_distance(self):
        seg = make_segment(n=1, distance=0.0, radius=1e-3)
        with pytest.raises(DegenerateGeometryError):
            build_segment(seg, WAVELENGTH, BETA)


class TestEpsilon:
    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_zero_rotation(self, n):
        assert epsilon_segment(make_segment(n=n, theta=0.3, phi=0.2), WAVELENGTH, BETA) < 1e-12
        assert epsilon_total(reference_chain(n)) < 1e-12

    @given(segments(rot=small_angles))
    def test_nonnegative(self, seg):
        assert epsilon_segment(seg, WAVELENGTH, BETA) >= 0

    def test_nondecreasing_on_sampled_diagonal(self):
        base = make_segment(n=8)
        grid = np.linspace(0, math.pi / 3, 25)
        vals = [epsilon_segment(base.with_rotation(a, a), WAVELENGTH, BETA) for a in grid]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_total_nondecreasing_on_sampled_diagonal(self):
        grid = np.linspace(0, math.pi / 9, 10)
        vals = [epsilon_total(reference_chain(8, rotations=((a, a),) * 3)) for a in grid]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_zero_reference_rejected(self):
        from ucaris.channel import _rel_err2
        with pytest.raises(ChannelError):
            _rel_err2(np.zeros((2, 2)), np.ones((2, 2)))


class TestChainProduct:
    def test_order(self, rng):
        a, b, c = (rng.normal(size=(3, 3)) for _ in range(3))
        np.testing.assert_allclose(chain_product([a, b, c]), c @ b @ a)

    def test_shape_mismatch(self):
        with pytest.raises(ChannelError):
            chain_product([np.ones((3, 2)), np.ones((3, 2))])
        with pytest.raises(ChannelError):
            chain_product([])

    def test_overall_channel_with_unit_phases(self):
        chain = reference_chain(4, rotations=((0.1, 0.2),) * 3)
        ones = [np.ones(4), np.eye(4)]
        np.testing.assert_allclose(overall_channel(chain, ones),
                                   chain_product([c.h_approx for c in chain]), rtol=1e-12)

    def test_overall_channel_applies_phases_between_hops(self, rng):
        chain = reference_chain(4)
        p1, p2 = (np.exp(1j * rng.uniform(0, 6, 4)) for _ in range(2))
        want = chain[2].h_exact @ np.diag(p2) @ chain[1].h_exact @ np.diag(p1) @ chain[0].h_exact
        np.testing.assert_allclose(overall_channel(chain, [p1, p2], "exact"), want, rtol=1e-12)

    def test_overall_channel_validation(self):
        chain = reference_chain(4)
        with pytest.raises(ChannelError):
            overall_channel(chain, [np.ones(4)])
        with pytest.raises(ChannelError):
            overall_channel(chain, [np.ones(3), np.ones(4)])
        with pytest.raises(ChannelError):
            overall_channel([], [])


class TestCirculant:
    def test_witness_of_circulant_is_zero(self, rng):
        row = rng.normal(size=6) + 1j * rng.normal(size=6)
        assert circulant_witness(circulant_from_first_row(row)).max_shift_deviation < 1e-15

    def test_witness_of_generic_matrix(self, rng):
        assert circulant_witness(rng.normal(size=(5, 5))).max_shift_deviation > 0.1

    def test_witness_requires_square(self):
        with pytest.raises(ChannelError):
            circulant_witness(np.ones((2, 3)))

    def test_witness_zero_matrix(self):
        assert circulant_witness(np.zeros((3, 3))).max_shift_deviation == 0

    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_hat_product_matches_circulant_oracle(self, n, rng):
        for _ in range(20):
            chain = random_chain(rng, n)
            prod = hat_product(chain)
            oracle = circulant_from_first_row(prod[0])
            scale = np.max(np.abs(prod))
            assert np.max(np.abs(prod - oracle)) / scale < 1e-10
            assert circulant_witness(prod, chain).max_shift_deviation < 1e-10

    def test_four_hop_chain(self, rng):
        for _ in range(10):
            assert circulant_witness(hat_product(random_chain(rng, 8, hops=4))) \
                .max_shift_deviation < 1e-10

    @given(st.integers(2, 12), small_angles, small_angles)
    def test_single_hop_hat_is_circulant(self, n, rx, ry):
        ch = build_segment(make_segment(n=n, rot_x=rx, rot_y=ry), WAVELENGTH, BETA)
        assert circulant_witness(ch.h_hat).max_shift_deviation < 1e-10

    def test_large_rotation_tilde_product_is_not_circulant(self):
        chain = reference_chain(8, rotations=((math.pi / 3, math.pi / 3),) * 3)
        dev = circulant_witness(chain_product([c.h_tilde for c in chain])).max_shift_deviation
        assert dev > 1e-3

    def test_shift_amplitudes_reported(self):
        chain = reference_chain(8)
        w = circulant_witness(hat_product(chain), chain)
        expected = (math.sqrt(1 - math.cos(math.pi / 4)) * 0.12 ** 2 * 2
                    / (math.sqrt(2) * chain[0].geometry.reference_distance))
        assert math.isclose(w.a_t, expected, rel_tol=1e-12)
        assert w.a_r > 0

    def test_hat_independent_of_included_angles(self, rng):
        rot = ((0.1, 0.2), (0.05, -0.1), (0.15, 0.0))
        ref = hat_product(reference_chain(8, rotations=rot))
        for _ in range(5):
            inc = tuple((rng.uniform(0, 6), rng.uniform(0, 1.2)) for _ in range(3))
            np.testing.assert_array_equal(hat_product(reference_chain(8, rotations=rot,
                                                                   included=inc)), ref)


def test_build_chain_preserves_order():
    segs = reference_segments(4)
    chain = build_chain(segs, WAVELENGTH, BETA)
    assert [c.geometry for c in chain] == segs
