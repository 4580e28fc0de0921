import numpy as np
import pytest
import scipy.linalg as sl
import scipy.sparse.linalg as sla
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from schrobpx.bpx import preconditioned_spectrum
from schrobpx.schrodinger import (RECOVERY_THRESHOLD, WarpedGrid, build_augmented, build_profile,
                                  choose_domain, evolve, exact_z, flatness, initial_state,
                                  recover, recovered_rows)
from schrobpx.stationary import integrate_factored, stopping_time

SCALAR = dict(A=np.array([[2.0]]), S=np.eye(1), b=np.array([1.0]))


def test_scalar_instantiation():
    sys_ = build_augmented(**SCALAR, T=1.0)
    np.testing.assert_array_equal(sys_.A_f().toarray(), [[-2, 1], [0, 0]])
    np.testing.assert_array_equal(sys_.z_f0, [0, 1])


def test_hermitian_split(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    sys_ = build_augmented(Q @ np.diag([1, 2, 3.0]) @ Q.T, rng.standard_normal((3, 4)),
                           rng.standard_normal(3), 2.5)
    H1, K = sys_.H1().toarray(), sys_.H2_generator().toarray()
    np.testing.assert_allclose(H1, H1.T, atol=1e-14)
    np.testing.assert_allclose(K, -K.T, atol=1e-14)
    np.testing.assert_allclose(H1 + 1j * sys_.H2().toarray(), sys_.A_f().toarray(), atol=1e-14)
    z = rng.standard_normal(sys_.dim)
    np.testing.assert_allclose(sys_.apply_Af(z), sys_.A_f() @ z, atol=1e-13)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        build_augmented(np.eye(2), np.eye(3), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        build_augmented(np.eye(2), np.eye(2), np.ones(2), 0.0)


def test_zero_rhs_stays_zero():
    sys_ = build_augmented(SCALAR["A"], SCALAR["S"], np.zeros(1), 3.0)
    g = WarpedGrid(10, 10, 64)
    assert not np.any(sys_.z_f0)
    assert not np.any(evolve(sys_, g, build_profile(1)))


def test_grid_layout():
    g = WarpedGrid(3.0, 5.0, 16)
    assert g.p[0] == -3.0 and g.dp == 0.5
    np.testing.assert_allclose(np.sort(g.nu)[1:], -np.sort(g.nu)[1:][::-1])
    assert np.abs(g.nu).max() == pytest.approx(g.nu_max)
    v = np.random.default_rng(0).standard_normal((16, 3))
    np.testing.assert_allclose(g.from_fourier(g.to_fourier(v)), v, atol=1e-14)
    assert np.linalg.norm(g.to_fourier(v)) == pytest.approx(np.linalg.norm(v))
    with pytest.raises(ValueError):
        WarpedGrid(-1, 1, 8)
    with pytest.raises(ValueError):
        WarpedGrid(1, 1, 7)


def test_momentum_matrix_differentiates_modes():
    g = WarpedGrid(np.pi, np.pi, 32)
    f = np.exp(3j * g.p)
    np.testing.assert_allclose(g.momentum_matrix() @ f, 3 * f, atol=1e-11)


@pytest.mark.parametrize("r,coeffs", [(1, [1.0]), (2, [3.0, -2.0]), (3, [6.0, -8.0, 3.0])])
def test_profile_coefficients(r, coeffs):
    np.testing.assert_allclose(build_profile(r).coeffs, coeffs, rtol=1e-14)


@given(r=st.integers(1, 8))
def test_profile_matching_conditions(r):
    prof = build_profile(r)
    j = np.arange(1, r + 1)
    for m in range(r):
        assert np.sum(prof.coeffs * j**m) == pytest.approx((-1.0) ** m, abs=1e-8 * 10**r)
    assert prof(np.array([0.0]))[0] == 1.0
    p = np.linspace(0, 5, 11)
    np.testing.assert_array_equal(prof(p), np.exp(-p))


def test_profile_smoothness_fd():
    prof, h = build_profile(2), 1e-5
    left = (prof(np.array([0.0])) - prof(np.array([-h]))) / h
    right = (prof(np.array([h])) - prof(np.array([0.0]))) / h
    assert left[0] == pytest.approx(-1, abs=1e-4) and right[0] == pytest.approx(-1, abs=1e-4)
    p = np.linspace(-5, 5, 101)
    np.testing.assert_allclose(build_profile(1)(p), np.exp(-np.abs(p)), rtol=1e-15)


def test_profile_order_limits():
    for bad in (0, 13):
        with pytest.raises(ValueError):
            build_profile(bad)


def test_recovery_threshold_constant():
    assert RECOVERY_THRESHOLD == 0.5
    g = WarpedGrid(1.0, 1.0, 8)
    assert g.p[g.recovery_index()] >= 0.5 > g.p[g.recovery_index() - 1]
    with pytest.raises(ValueError):
        WarpedGrid(2.0, 0.25, 8).recovery_index()


def test_scalar_duhamel():
    sys_ = build_augmented(**SCALAR, T=5.0)
    g = choose_domain(sys_, 1e-8, r=3, Np=4096)
    rec = recover(evolve(sys_, g, build_profile(3)), g, sys_)
    assert rec.u[0] == pytest.approx((1 - np.exp(-10)) / 2, abs=1e-6)
    assert rec.z_f[1] == pytest.approx(5.0, rel=1e-6)
    assert rec.imag_residual < 1e-6


def test_paths_agree(level_factory):
    lv = level_factory(1, 2)
    sys_ = build_augmented(lv.A, lv.fp, lv.b, 3.0)
    g = WarpedGrid(12.5, 11.5, 64)
    prof = build_profile(2)
    vs = {p: evolve(sys_, g, prof, p) for p in ("modal", "dense", "krylov")}
    for p in ("dense", "krylov"):
        np.testing.assert_allclose(vs[p], vs["modal"], atol=1e-8 * np.abs(vs["modal"]).max())
    with pytest.raises(ValueError):
        evolve(sys_, g, prof, "magic")


def test_unitarity_across_configs(rng):
    for r in (1, 2, 3):
        A = np.diag(rng.uniform(0.5, 4, 5))
        sys_ = build_augmented(A, rng.standard_normal((5, 7)), rng.standard_normal(5), 2.0)
        g = choose_domain(sys_, 1e-3, r=r, Np=256)
        v0 = initial_state(sys_, g, build_profile(r))
        v = evolve(sys_, g, build_profile(r))
        assert abs(np.linalg.norm(v) - np.linalg.norm(v0)) <= 1e-10 * np.linalg.norm(v0)


def test_mode_decoupling_against_full_ode(level_factory):
    lv = level_factory(1, 1)
    sys_ = build_augmented(lv.A, lv.fp, lv.b, 1.5)
    g = WarpedGrid(9.5, 6.5, 32)
    prof = build_profile(2)
    P = g.momentum_matrix()
    H1, H2 = sys_.H1().toarray(), sys_.H2().toarray()
    G = -1j * np.kron(P, H1) + 1j * np.kron(np.eye(g.Np), H2)
    v0 = initial_state(sys_, g, prof).ravel()
    sol = solve_ivp(lambda t, y: G @ y, (0, sys_.T), v0, method="DOP853", rtol=1e-12, atol=1e-14)
    ref = sol.y[:, -1].reshape(g.Np, -1)
    v = evolve(sys_, g, prof)
    np.testing.assert_allclose(v, ref, atol=1e-8 * np.abs(ref).max())


def test_recovered_z_matches_reference_ode(level_factory):
    lv = level_factory(2, 1)
    T = 4.0
    sys_ = build_augmented(lv.A, lv.fp, lv.b, T)
    g = choose_domain(sys_, 1e-10, r=3, Np=8192)
    rec = recover(evolve(sys_, g, build_profile(3)), g, sys_)
    z_ref = integrate_factored(lv.A, lv.b, lv.fp, T, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(rec.z, z_ref, atol=1e-8 * np.linalg.norm(z_ref))
    np.testing.assert_allclose(exact_z(sys_), z_ref, atol=1e-9 * np.linalg.norm(z_ref))


def test_four_by_four_against_expm():
    rng = np.random.default_rng(7)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    A = Q @ np.diag([1.0, 1.7, 2.5, 4.0]) @ Q.T
    b = rng.standard_normal(4)
    for S in (np.eye(4), rng.standard_normal((4, 6)) / 2):
        sys_ = build_augmented(A, S, b, 5.0)
        ref = sl.expm(sys_.A_f().toarray() * sys_.T) @ sys_.z_f0
        g = choose_domain(sys_, 1e-8, r=3, Np=4096)
        rec = recover(evolve(sys_, g, build_profile(3)), g, sys_)
        assert np.linalg.norm(rec.z_f - ref) <= 1e-6 * np.linalg.norm(ref)


def test_embedded_equivalent_to_compact(level_factory):
    lv = level_factory(2, 2)
    g = WarpedGrid(40.5, 23.5, 512)
    out = {}
    for emb in (False, True):
        sys_ = build_augmented(lv.A, lv.fp, lv.b, 4.0, embedded=emb)
        out[emb] = recover(evolve(sys_, g, build_profile(2)), g, sys_)
    np.testing.assert_allclose(out[True].u, out[False].u, atol=1e-10 * np.linalg.norm(out[False].u))
    assert np.allclose(lv.fp.compact(out[True].z), out[False].z, atol=1e-9)


def test_recovery_flatness_and_aux_block(level_factory):
    lv = level_factory(2, 2)
    eps = 1e-4
    T = stopping_time(preconditioned_spectrum(lv.A, lv.fp).lambda_min, eps)
    sys_ = build_augmented(lv.A, lv.fp, lv.b, T)
    g = choose_domain(sys_, eps, r=3)
    v = evolve(sys_, g, build_profile(3))
    assert flatness(v, g) <= 10 * eps
    rec = recover(v, g, sys_)
    np.testing.assert_allclose(rec.z_f[sys_.n_prime:], T * sys_.b_S, rtol=0, atol=eps * np.linalg.norm(T * sys_.b_S))
    rows = recovered_rows(v, g)
    assert rows.shape[0] >= 2


def test_choose_domain_rules(level_factory):
    lv = level_factory(2, 1)
    sys_ = build_augmented(lv.A, lv.fp, lv.b, 5.0)
    eps = 1e-6
    g = choose_domain(sys_, eps, margin=2.0, r=2)
    lam_minus, lam_plus = sys_.h1_extremes()
    assert lam_plus * sys_.T <= 0.5 + 1e-12
    assert g.R == pytest.approx(0.5 + np.log(1e6) + 2)
    assert g.L == pytest.approx(lam_minus * 5.0 + np.log(1e6) + 2)
    assert g.dp <= eps ** 0.5 < 2 * g.dp
    H1 = np.linalg.eigvalsh(sys_.H1().toarray())
    assert lam_minus == pytest.approx(-H1[0], rel=1e-10)
    assert choose_domain(sys_, eps, Np=2048).Np == 2048
    with pytest.raises(ValueError):
        choose_domain(sys_, 2.0)


def test_krylov_fallback_large(level_factory):
    lv = level_factory(2, 1)
    sys_ = build_augmented(lv.A, lv.fp, lv.b, 2.0)
    assert sys_.spectrum_bounds()[1] == pytest.approx(
        sla.eigsh(sys_.A_S_operator(), k=1, which="LA", return_eigenvectors=False)[0], rel=1e-8)
