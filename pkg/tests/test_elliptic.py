import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from basinforge.elliptic import (
    MIN_COMPLEMENT_SQ,
    Modulus,
    agm,
    carlson_rf,
    complete_E,
    complete_K,
    delta_libration,
    e_over_k,
    elliptic_F,
    fourier_coefficients,
    incomplete_E,
    invert_modulus,
    jacobi_amplitude,
    jacobi_elliptic,
    jacobi_fourier,
    jacobi_zeta,
    nome,
)
from basinforge.errors import DomainError, NoSolutionError

K_TABLE = 0.885201568846

moduli = st.floats(min_value=0.0, max_value=0.999, allow_nan=False)
args = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)


def quad_K(k):
    return integrate.quad(lambda t: 1 / math.sqrt(1 - (k * math.sin(t)) ** 2), 0, math.pi / 2,
                          epsabs=1e-14, epsrel=1e-14)[0]


def quad_E(k):
    return integrate.quad(lambda t: math.sqrt(1 - (k * math.sin(t)) ** 2), 0, math.pi / 2,
                          epsabs=1e-14, epsrel=1e-14)[0]


class TestComplete:
    def test_K_at_zero(self):
        assert complete_K(0.0) == pytest.approx(math.pi / 2, abs=1e-15)

    def test_E_at_zero_and_one(self):
        assert complete_E(0.0) == pytest.approx(math.pi / 2, abs=1e-15)
        assert complete_E(1.0) == 1.0

    def test_K_table_modulus(self):
        assert complete_K(K_TABLE) == pytest.approx(math.pi / math.sqrt(2), rel=1e-11)

    @pytest.mark.parametrize("k", [0.1, 0.5, K_TABLE, 0.99])
    def test_against_quadrature(self, k):
        assert complete_K(k) == pytest.approx(quad_K(k), rel=1e-12)
        assert complete_E(k) == pytest.approx(quad_E(k), rel=1e-12)

    def test_near_one_against_scipy(self):
        for kc in (1e-3, 1e-5, 1e-7):
            mod = Modulus.from_complement(kc)
            ref = special.ellipkm1(kc * kc)
            assert complete_K(mod) == pytest.approx(ref, rel=1e-12)

    def test_monotone(self):
        ks = np.linspace(0, 0.999, 200)
        K = [complete_K(k) for k in ks]
        E = [complete_E(k) for k in ks]
        assert np.all(np.diff(K) > 0)
        assert np.all(np.diff(E) < 0)

    def test_log_divergence(self):
        kc = 1e-7
        mod = Modulus.from_complement(kc)
        assert complete_K(mod) == pytest.approx(math.log(4 / kc), rel=1e-12)

    @pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5, float("nan")])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            complete_K(bad)

    def test_E_domain(self):
        with pytest.raises(DomainError):
            complete_E(1.01)

    def test_modulus_guard(self):
        with pytest.raises(DomainError):
            Modulus.from_complement(math.sqrt(MIN_COMPLEMENT_SQ) / 2)

    @given(moduli)
    def test_legendre_relation(self, k):
        if not 1e-3 < k:
            k = 0.3
        mod = Modulus(k)
        comp = mod.complement()
        K, E = complete_K(mod), complete_E(mod)
        Kp, Ep = complete_K(comp), complete_E(comp)
        assert E * Kp + Ep * K - K * Kp == pytest.approx(math.pi / 2, rel=1e-12)

    @pytest.mark.parametrize("k", [0.2, 0.6, 0.95])
    def test_derivatives(self, k):
        h = 1e-6
        K, E = complete_K(k), complete_E(k)
        dK = (complete_K(k + h) - complete_K(k - h)) / (2 * h)
        dE = (complete_E(k + h) - complete_E(k - h)) / (2 * h)
        assert dK == pytest.approx((E / (1 - k * k) - K) / k, rel=1e-6)
        assert dE == pytest.approx((E - K) / k, rel=1e-6)

    def test_agm(self):
        assert agm(1.0, 1.0) == 1.0
        assert agm(1.0, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert agm(24.0, 6.0) == pytest.approx(13.458171481725616, rel=1e-14)
        with pytest.raises(DomainError):
            agm(-1.0, 1.0)

    def test_delta_libration_small_k(self):
        assert delta_libration(0.0) == 0.5
        for k in (1e-6, 1e-3, 0.1, 0.7, 0.9999):
            mod = Modulus(k)
            ref = (quad_E(k) / quad_K(k) - (1 - k * k)) / (k * k) if k > 1e-3 else 0.5 - k * k / 16
            assert delta_libration(mod) == pytest.approx(ref, rel=1e-9)


class TestJacobi:
    def test_circular_limit(self):
        u = np.linspace(-7, 7, 31)
        sn, cn, dn = jacobi_elliptic(u, 0.0)
        np.testing.assert_allclose(sn, np.sin(u), atol=1e-15)
        np.testing.assert_allclose(cn, np.cos(u), atol=1e-15)
        np.testing.assert_allclose(dn, 1.0)

    @pytest.mark.parametrize("k", [0.3, 0.7, 0.999])
    def test_quarter_period(self, k):
        mod = Modulus(k)
        sn, cn, dn = jacobi_elliptic(complete_K(mod), mod)
        assert sn == pytest.approx(1.0, abs=1e-14)
        assert cn == pytest.approx(0.0, abs=1e-12)
        assert dn == pytest.approx(mod.kc, rel=1e-10)

    def test_against_scipy(self):
        u = np.linspace(-20, 20, 401)
        for k in (0.1, 0.7, 0.99):
            sn, cn, dn = jacobi_elliptic(u, k)
            ssn, scn, sdn, _ = special.ellipj(u, k * k)
            np.testing.assert_allclose(sn, ssn, atol=1e-12)
            np.testing.assert_allclose(cn, scn, atol=1e-12)
            np.testing.assert_allclose(dn, sdn, atol=1e-12)

    def test_fourier_oracle(self):
        sn, cn, dn = jacobi_elliptic(1.0, 0.7)
        fs, fc, fd = jacobi_fourier(1.0, 0.7)
        assert (sn, cn, dn) == pytest.approx((fs, fc, fd), abs=1e-14)

    @given(args, st.floats(min_value=0.0, max_value=0.9999))
    def test_identities(self, u, k):
        sn, cn, dn = jacobi_elliptic(u, k)
        assert sn * sn + cn * cn == pytest.approx(1.0, abs=1e-12)
        assert dn * dn + k * k * sn * sn == pytest.approx(1.0, abs=1e-12)

    @given(args, st.floats(min_value=0.0, max_value=0.999))
    @settings(max_examples=60)
    def test_periods(self, u, k):
        mod = Modulus(k)
        K = complete_K(mod)
        a = jacobi_elliptic(u, mod)
        b = jacobi_elliptic(u + 4 * K, mod)
        assert a[0] == pytest.approx(b[0], abs=1e-11)
        assert a[1] == pytest.approx(b[1], abs=1e-11)
        assert jacobi_elliptic(u + 2 * K, mod)[2] == pytest.approx(a[2], abs=1e-11)

    @pytest.mark.parametrize("k", [0.4, 0.9])
    def test_derivative(self, k):
        u = np.linspace(-3, 3, 13)
        h = 1e-6
        sn, cn, dn = jacobi_elliptic(u, k)
        dsn = (jacobi_elliptic(u + h, k)[0] - jacobi_elliptic(u - h, k)[0]) / (2 * h)
        dam = (jacobi_amplitude(u + h, k) - jacobi_amplitude(u - h, k)) / (2 * h)
        np.testing.assert_allclose(dsn, cn * dn, atol=1e-6)
        np.testing.assert_allclose(dam, dn, atol=1e-6)

    def test_amplitude_monotone_and_inverse(self):
        mod = Modulus(0.8)
        u = np.linspace(-15, 15, 301)
        am = jacobi_amplitude(u, mod)
        assert np.all(np.diff(am) > 0)
        np.testing.assert_allclose(elliptic_F(am, mod), u, atol=1e-12)

    def test_elliptic_F_against_scipy(self):
        phi = np.linspace(-5, 5, 41)
        np.testing.assert_allclose(elliptic_F(phi, 0.6), special.ellipkinc(phi, 0.36), rtol=1e-13, atol=1e-14)

    def test_carlson_rf(self):
        assert carlson_rf(1.0, 1.0, 1.0) == pytest.approx(1.0)
        assert carlson_rf(0.0, 1.0, 2.0) == pytest.approx(1.3110287771461, rel=1e-12)
        with pytest.raises(DomainError):
            carlson_rf(-1.0, 1.0, 1.0)


class TestIncompleteE:
    def test_zero_and_half_period(self):
        mod = Modulus(0.6)
        assert incomplete_E(0.0, mod) == 0.0
        assert incomplete_E(2 * complete_K(mod), mod) == pytest.approx(2 * complete_E(mod), rel=1e-14)

    @pytest.mark.parametrize("u", [0.3, 1.7, 4.0, -2.5])
    def test_against_quadrature(self, u):
        k = 0.75
        ref = integrate.quad(lambda s: jacobi_elliptic(s, k)[2] ** 2, 0, u, epsabs=1e-14, epsrel=1e-14)[0]
        assert incomplete_E(u, k) == pytest.approx(ref, rel=1e-12, abs=1e-14)

    def test_quasi_periodicity(self):
        mod = Modulus(0.9)
        K, E = complete_K(mod), complete_E(mod)
        u = np.linspace(-3, 3, 7)
        np.testing.assert_allclose(incomplete_E(u + 2 * K, mod), incomplete_E(u, mod) + 2 * E, atol=1e-12)

    def test_zeta_periodic(self):
        mod = Modulus(0.9)
        K = complete_K(mod)
        u = np.linspace(-3, 3, 7)
        np.testing.assert_allclose(jacobi_zeta(u + 2 * K, mod), jacobi_zeta(u, mod), atol=1e-13)


class TestFourier:
    @pytest.mark.parametrize("k", [0.1, 0.5, 0.9, 0.999])
    def test_vs_agm(self, k):
        u = np.linspace(-10, 10, 201)
        a = np.array(jacobi_elliptic(u, k))
        b = np.array(jacobi_fourier(u, k))
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_dn_denominator_sign(self):
        # the dn coefficients carry 1 + q^(2n); the minus sign gives a wrong series
        mod = Modulus(0.9)
        K, q = complete_K(mod), nome(mod)
        _, _, dn_c = fourier_coefficients(mod)
        n = np.arange(1, len(dn_c))
        np.testing.assert_allclose(dn_c[1:], 2 * math.pi / K * q**n / (1 + q ** (2 * n)))
        v = 0.3
        wrong = math.pi / (2 * K) + np.sum(2 * math.pi / K * q**n / (1 - q ** (2 * n)) * np.cos(2 * n * v))
        assert abs(wrong - jacobi_elliptic(2 * K * v / math.pi, mod)[2]) > 1e-3

    def test_nome(self):
        assert nome(0.0) == 0.0
        k = 0.7
        Kp = complete_K(Modulus(k).complement())
        assert nome(k) == pytest.approx(math.exp(-math.pi * Kp / complete_K(k)), rel=1e-14)


class TestInversion:
    @pytest.mark.parametrize("q", [2, 4, 6, 8, 10, 12])
    def test_residuals(self, q):
        target = math.pi * q * math.sqrt(0.5) / 2
        for form in ("K", "kK"):
            mod = invert_modulus(target, form)
            val = complete_K(mod) * (1.0 if form == "K" else mod.k)
            assert val == pytest.approx(target, rel=1e-12)

    def test_no_solution(self):
        with pytest.raises(NoSolutionError):
            invert_modulus(1.0, "K")
        with pytest.raises(NoSolutionError):
            invert_modulus(-1.0, "kK")

    def test_too_close_to_one(self):
        with pytest.raises(DomainError):
            invert_modulus(40.0, "K")

    def test_bad_form(self):
        with pytest.raises(DomainError):
            invert_modulus(2.0, "E")

    @given(st.floats(min_value=1.6, max_value=15.0))
    def test_round_trip(self, target):
        mod = invert_modulus(target, "K")
        assert complete_K(mod) == pytest.approx(target, rel=1e-12)

    def test_e_over_k_range(self):
        for k in np.linspace(0, 0.999, 50):
            r = e_over_k(k)
            assert 0 < r <= 1
