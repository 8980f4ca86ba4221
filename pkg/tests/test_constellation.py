import numpy as np
import pytest
from hypothesis import given, strategies as st

from imphy.constellation import (bits_str, bits_to_int, default_constellation, int_to_bits,
                                 make_pam, make_psk, make_qam, make_rect_qam, make_star_qam8,
                                 parse_bits)
from imphy.errors import InvalidOrderError


@pytest.mark.parametrize("M", [2, 4, 8, 16, 32, 64])
def test_psk_unit_energy_and_natural_labels(M):
    c = make_psk(M)
    assert c.average_energy == pytest.approx(1.0, abs=1e-12)
    # natural labeling: label i sits at angle 2*pi*i/M
    np.testing.assert_allclose(c.points, np.exp(2j * np.pi * np.arange(M) / M), atol=1e-12)


def test_qpsk_default_has_diagonal_points():
    c = default_constellation(4)
    np.testing.assert_allclose(c.points[0], (1 + 1j) / np.sqrt(2), atol=1e-15)
    # labels follow the phase: 00, 01, 10, 11 -> 45, 135, 225, 315 degrees
    np.testing.assert_allclose(np.angle(c.points, deg=True) % 360, [45, 135, 225, 315], atol=1e-9)


def test_bpsk_points_are_exactly_real():
    c = make_psk(2)
    assert np.all(c.points.imag == 0.0)
    assert list(c.points.real) == [1.0, -1.0]


@pytest.mark.parametrize("M", [4, 16, 64, 256, 1024])
def test_square_qam_energy_and_grid(M):
    c = make_qam(M)
    assert c.average_energy == pytest.approx(1.0, rel=1e-12)
    L = int(np.sqrt(M))
    # unnormalized grid spacing is uniform: scale back and compare with odd integers
    scale = np.sqrt(2 * (M - 1) / 3)
    re = np.unique(np.round(c.points.real * scale, 9))
    np.testing.assert_allclose(re, np.arange(-(L - 1), L, 2))


def test_qam_min_distance_oracle():
    # 16-QAM with unit energy: d_min^2 = 4 / 10
    c = make_qam(16)
    d = np.abs(c.points[:, None] - c.points[None, :]) ** 2
    assert d[~np.eye(16, dtype=bool)].min() == pytest.approx(0.4)


@pytest.mark.parametrize("M", [3, 8, 32, 0, -4])
def test_qam_rejects_non_square(M):
    with pytest.raises(InvalidOrderError):
        make_qam(M)


def test_psk_rejects_non_power_of_two():
    with pytest.raises(InvalidOrderError):
        make_psk(6)


def test_rect_qam_and_pam_and_star():
    r = make_rect_qam(4, 2)
    assert r.order == 8 and r.average_energy == pytest.approx(1.0)
    p = make_pam(4)
    assert np.all(p.points.imag == 0) and p.average_energy == pytest.approx(1.0)
    s = make_star_qam8()
    assert s.order == 8 and s.average_energy == pytest.approx(1.0)
    assert len(np.unique(np.round(s.points, 9))) == 8


@given(st.sampled_from([2, 4, 8, 16, 64]), st.data())
def test_modulate_demodulate_round_trip(M, data):
    c = default_constellation(M)
    b = c.bits_per_symbol
    n = data.draw(st.integers(1, 20))
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=n * b, max_size=n * b)), dtype=np.uint8)
    sym = c.modulate(bits)
    assert sym.shape == (n,)
    np.testing.assert_array_equal(c.demodulate(sym), bits)


@given(st.integers(0, 2 ** 20 - 1), st.integers(20, 40))
def test_int_bits_round_trip(v, width):
    bits = int_to_bits(v, width)
    assert len(bits) == width
    assert bits_to_int(bits) == v
    assert parse_bits(bits_str(bits)).tolist() == bits.tolist()


def test_parse_bits_rejects_garbage():
    with pytest.raises(ValueError):
        parse_bits("01a1")


@given(st.floats(-np.pi, np.pi), st.sampled_from([4, 16]))
def test_rotation_preserves_energy(theta, M):
    c = default_constellation(M)
    assert c.rotated(theta).average_energy == pytest.approx(c.average_energy)
