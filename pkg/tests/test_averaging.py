import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from chiralep.averaging import (
    ISOTROPIC_KAPPA,
    MicroscopicParams,
    decompose,
    mc_orientation_average,
    random_microscopic,
    random_rotations,
    triple_product,
)

E = np.eye(3)
TRIAD = dict(d1E=E[0], d2E=E[1], d12=E[2], F1=E[0], F2=E[1], F3=E[2])


def levi_civita_average(micro):
    # <R_ia R_jb R_kc> = eps_ijk eps_abc / 6 contracted by hand
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k], eps[i, k, j] = 1, -1
    d = np.einsum("a,b,c->abc", np.conj(micro.d1E), micro.d2E, micro.d12)
    f = np.einsum("i,j,k->ijk", np.conj(micro.F1), micro.F2, micro.F3)
    return (np.einsum("ijk,abc,ijk,abc->", eps, eps, f, d) / 6).real


def test_triple_product_examples():
    assert triple_product(E[0], E[1], E[2]) == 1
    assert triple_product(E[0], E[1], E[0] + 2 * E[1]) == 0
    a, b, c = [1, 2j, 3], [0.5, -1, 1j], [2, 1, 0]
    assert triple_product(a, c, b) == -triple_product(a, b, c)
    assert triple_product(a, b, c, conjugate_first=True) == triple_product(np.conj(a), b, c)


def test_triad_decomposition():
    dec = decompose(MicroscopicParams(**TRIAD))
    assert abs(dec.chi_m) == 1 and abs(dec.h3) == 1
    assert dec.phi_m == 0 and dec.phi_l == 0
    assert dec.averaged_value == ISOTROPIC_KAPPA


def test_kappa_matches_monte_carlo():
    mean, err = mc_orientation_average(MicroscopicParams(**TRIAD), 200_000, seed=11)
    assert abs(mean - ISOTROPIC_KAPPA) <= 3 * err


def test_enantiomer_swap_negates(rng):
    for _ in range(20):
        m = random_microscopic(rng)
        assert decompose(m.mirrored()).averaged_value == -decompose(m).averaged_value


def test_coplanar_field_vanishes():
    m = MicroscopicParams(**{**TRIAD, "F3": 2 * E[1]})
    dec = decompose(m)
    assert dec.h3 == 0 and dec.averaged_value == 0


def test_achiral_molecule_averages_to_zero():
    m = MicroscopicParams(**{**TRIAD, "d12": E[0] + E[1]})
    assert decompose(m).chi_m == 0
    mean, err = mc_orientation_average(m, 50_000, seed=3)
    assert abs(mean) <= 3 * err


def test_std_error_halves_with_four_times_samples():
    m = MicroscopicParams(**TRIAD)
    _, e1 = mc_orientation_average(m, 20_000, seed=5)
    _, e4 = mc_orientation_average(m, 80_000, seed=5)
    assert e4 / e1 == pytest.approx(0.5, rel=0.2)


def test_mc_deterministic_and_shard_reproducible():
    m = MicroscopicParams(**TRIAD)
    assert mc_orientation_average(m, 5000, 9, shards=4) == mc_orientation_average(m, 5000, 9, shards=4)
    threaded = mc_orientation_average(m, 5000, 9, shards=4, workers=4)
    assert threaded == mc_orientation_average(m, 5000, 9, shards=4)
    assert mc_orientation_average(m, 5000, 9) != mc_orientation_average(m, 5000, 10)


def test_mc_rejects_small_samples():
    with pytest.raises(ValueError):
        mc_orientation_average(MicroscopicParams(**TRIAD), 999, 0)


def test_resonance_not_required_for_geometry_but_frequencies_positive():
    with pytest.raises(ValueError):
        MicroscopicParams(**TRIAD, omega2=0)


def test_analytic_matches_levi_civita_contraction(rng):
    for _ in range(50):
        m = random_microscopic(rng)
        assert decompose(m).averaged_value == pytest.approx(levi_civita_average(m), rel=1e-12, abs=1e-14)


def test_rotations_are_haar_uniform():
    rot = random_rotations(100_000, np.random.default_rng(0))
    np.testing.assert_allclose(np.einsum("nij,nkj->nik", rot, rot), np.broadcast_to(E, rot.shape), atol=1e-12)
    assert np.allclose(np.linalg.det(rot), 1)
    # second moments of a Haar matrix: <R_ij R_kl> = delta_ik delta_jl / 3
    np.testing.assert_allclose(np.mean(rot**2, axis=0), np.full((3, 3), 1 / 3), atol=5e-3)
    assert abs(np.mean(np.trace(rot, axis1=1, axis2=2))) < 0.01


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    rng = np.random.default_rng(seed)
    m = random_microscopic(rng)
    r = Rotation.random(random_state=seed).as_matrix()
    turned = m.rotated(r)
    assert decompose(turned).chi_m == pytest.approx(decompose(m).chi_m, rel=1e-12)
    fields = MicroscopicParams(m.d1E, m.d2E, m.d12, r @ m.F1, r @ m.F2, r @ m.F3)
    assert decompose(fields).h3 == pytest.approx(decompose(m).h3, rel=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_field_reflection_and_handedness_swap(seed):
    rng = np.random.default_rng(seed)
    m = random_microscopic(rng)
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    mirror = np.eye(3) - 2 * np.outer(n, n)
    reflected = MicroscopicParams(m.d1E, m.d2E, m.d12, mirror @ m.F1, mirror @ m.F2, mirror @ m.F3)
    v = decompose(m).averaged_value
    assert decompose(reflected).averaged_value == pytest.approx(-v, rel=1e-12, abs=1e-14)
    flipped = MicroscopicParams(m.d1E, m.d2E, m.d12, m.F1, m.F2, -m.F3)
    assert decompose(flipped).averaged_value == -v
    assert decompose(flipped).phi_l == pytest.approx(
        math.remainder(decompose(m).phi_l + math.pi, 2 * math.pi), abs=1e-12)


@settings(max_examples=50)
@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_cosine_form_and_orthogonality(phi_m, phi_l):
    d1 = E[0] * np.exp(-1j * phi_m)
    f1 = E[0] * np.exp(1j * phi_l)  # arg h3 = -phi_l
    m = MicroscopicParams(d1, E[1], E[2], f1, E[1], E[2])
    dec = decompose(m)
    assert dec.averaged_value == pytest.approx(ISOTROPIC_KAPPA * math.cos(phi_m - phi_l), abs=1e-15)
    ortho = MicroscopicParams(d1, E[1], E[2], E[0] * np.exp(1j * (phi_m + math.pi / 2)), E[1], E[2])
    assert abs(decompose(ortho).averaged_value) <= 1e-12
    aligned = MicroscopicParams(d1, E[1], E[2], E[0] * np.exp(1j * phi_m), E[1], E[2])
    assert decompose(aligned).averaged_value == pytest.approx(ISOTROPIC_KAPPA, abs=1e-15)


def test_phases_are_pseudoscalar_arguments(rng):
    m = random_microscopic(rng)
    dec = decompose(m)
    assert dec.phi_m == pytest.approx(np.angle(dec.chi_m))
    assert dec.phi_l == pytest.approx(-np.angle(dec.h3))
    assert dec.averaged_value == pytest.approx(
        ISOTROPIC_KAPPA * abs(dec.chi_m) * abs(dec.h3) * math.cos(dec.phi_m - dec.phi_l))
