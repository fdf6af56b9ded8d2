import warnings

import numpy as np
import pytest

from mracflyer.controller import GainSet
from mracflyer.errors import CertificationError, DomainError
from mracflyer.lyapunov import (
    assemble_AB,
    block_q,
    certify,
    is_hurwitz,
    lyapunov_rate,
    lyapunov_value,
    solve_lyapunov,
)

from .conftest import G, M
from .oracles import lyapunov_integral, lyapunov_value_sum, random_hurwitz, random_spd


def test_unit_ratio_gains_give_identity_blocks():
    g = GainSet([M] * 3, [M] * 3, [M] * 3, M, G, 1.0)
    A = assemble_AB(g).A
    for cols in (slice(0, 3), slice(3, 6), slice(6, 9)):
        np.testing.assert_allclose(A[6:9, cols], -np.eye(3), rtol=1e-15)
    np.testing.assert_array_equal(A[0:3, 3:6], np.eye(3))
    np.testing.assert_array_equal(A[3:6, 6:9], np.eye(3))
    assert np.count_nonzero(A) == 6 + 9


def test_B_structure(gains):
    B = assemble_AB(gains).B
    u = np.array([1.0, 0.0, 0.0])
    expect = np.zeros(9)
    expect[6] = -1.0 / M
    np.testing.assert_allclose(B @ u, expect, rtol=1e-15)


def test_default_characteristic_polynomial(gains):
    A = assemble_AB(gains).A
    expanded = np.polymul(np.polymul([1, 6], [1, 8]), [1, 10])
    np.testing.assert_allclose(expanded, [1, 24, 188, 480])
    np.testing.assert_allclose([gains.kd[0] / M, gains.kp[0] / M, gains.ki[0] / M], expanded[1:], rtol=1e-13)
    # the 9x9 characteristic polynomial is the per-axis cubic cubed
    np.testing.assert_allclose(np.poly(A), np.polymul(np.polymul(expanded, expanded), expanded), rtol=1e-6)


def test_is_hurwitz_examples(gains):
    ok, abscissa, _ = is_hurwitz(-np.eye(9))
    assert ok and abscissa == -1.0
    A = assemble_AB(gains).A.copy()
    A[6:9, 0:3] = 0.0  # the ki = 0 limit: xi decouples with a zero eigenvalue
    assert not is_hurwitz(A).hurwitz
    chk = is_hurwitz(assemble_AB(gains).A)
    assert chk.hurwitz
    assert chk.abscissa == pytest.approx(-6.0, abs=1e-6)


def test_solve_identity_and_scalar():
    cert = solve_lyapunov(-np.eye(9), np.eye(9))
    np.testing.assert_allclose(cert.P, np.eye(9) / 2, rtol=0, atol=1e-15)
    cert = solve_lyapunov([[-2.0]], [[4.0]])
    assert cert.P[0, 0] == pytest.approx(1.0, rel=1e-15)


def test_default_certificate_matches_integral(gains):
    _, cert = certify(gains)
    assert cert.residual <= 1e-10 * np.linalg.norm(cert.Q)
    P_int = lyapunov_integral(cert.A, cert.Q)
    np.testing.assert_allclose(cert.P, P_int, rtol=0, atol=1e-6 * np.abs(P_int).max())


def test_integral_oracle_on_random_systems(rng):
    for _ in range(10):
        A = random_hurwitz(rng)
        Q = random_spd(rng)
        P = solve_lyapunov(A, Q).P
        P_int = lyapunov_integral(A, Q)
        assert np.linalg.norm(P - P_int) <= 1e-6 * np.linalg.norm(P_int)


def test_random_residuals_and_cholesky(rng):
    for _ in range(100):
        A = random_hurwitz(rng, abscissa_range=(-3.0, -0.05))
        Q = random_spd(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cert = solve_lyapunov(A, Q)
        P = cert.P
        assert np.linalg.norm(A.T @ P + P @ A + Q) <= 1e-10 * np.linalg.norm(Q)
        assert cert.residual <= 1e-10 * np.linalg.norm(Q)
        np.testing.assert_array_equal(P, P.T)
        np.linalg.cholesky(P)


def test_scaling(rng):
    A = random_hurwitz(rng)
    Q = random_spd(rng)
    P1 = solve_lyapunov(A, Q).P
    for c in (1e-3, 2.5, 1e4):
        Pc = solve_lyapunov(A, c * Q).P
        assert np.linalg.norm(Pc - c * P1) <= 1e-10 * np.linalg.norm(c * P1)


def test_non_hurwitz_refused(gains):
    A = assemble_AB(gains).A.copy()
    A[6:9, 0:3] = 0.0
    with pytest.raises(CertificationError, match="zero eigenvalue") as info:
        solve_lyapunov(A, np.eye(9))
    assert np.max(info.value.eigenvalues.real) > -1e-9
    with pytest.raises(CertificationError, match="unstable eigenvalue"):
        solve_lyapunov(np.eye(9), np.eye(9))


def test_bad_Q_refused():
    with pytest.raises(DomainError):
        solve_lyapunov(-np.eye(9), -np.eye(9))
    Q = np.eye(9)
    Q[0, 1] = 0.5
    with pytest.raises(DomainError):
        solve_lyapunov(-np.eye(9), Q)


def test_ill_conditioned_warning():
    A = -np.diag([1e-8 * 2] + [1e6] * 8)
    with pytest.warns(RuntimeWarning, match="ill-conditioned"):
        cert = solve_lyapunov(A, np.eye(9))
    assert cert.warnings


def test_lyapunov_value_examples():
    P = np.eye(9)
    assert lyapunov_value(np.zeros(9), np.zeros((4, 3)), P, 1.0) == 0.0
    Wt = np.zeros((4, 3))
    Wt[0, 0] = 2.0
    assert lyapunov_value(np.zeros(9), Wt, P, 4.0) == pytest.approx(1.0, rel=1e-15)


def test_lyapunov_value_matches_double_sum(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 10))
        z = rng.normal(size=9)
        Wt = rng.normal(size=(n, 3))
        P = random_spd(rng)
        gamma = float(rng.uniform(0.1, 10))
        got = lyapunov_value(z, Wt, P, gamma)
        want = lyapunov_value_sum(z, Wt, P, gamma)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


def test_lyapunov_rate_examples():
    assert lyapunov_rate(np.zeros(9), np.eye(9)) == 0.0
    e = np.zeros(9)
    e[4] = 1.0
    assert lyapunov_rate(e, np.eye(9)) == -1.0


def test_block_q():
    np.testing.assert_array_equal(block_q(), np.eye(9))
    np.testing.assert_array_equal(np.diag(block_q([4, 2, 1])), [4, 4, 4, 2, 2, 2, 1, 1, 1])
