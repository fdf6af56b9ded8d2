"""Acceptance suite: one test (and one PASS/FAIL summary line) per criterion."""

import json
import time

import numpy as np
import pytest
from scipy.integrate import simpson

from mracflyer.cli import main
from mracflyer.config import builtin_config
from mracflyer.harness import compute_rms, run_trial
from mracflyer.lyapunov import lyapunov_value, solve_lyapunov
from mracflyer.plant import N3, PlantParams, SimState, Zero, rk4_step
from mracflyer.rbf import RbfNetwork, eval_force, eval_phi

from . import conftest
from .oracles import (
    force_loop,
    lyapunov_integral,
    lyapunov_value_sum,
    phi_loop,
    random_hurwitz,
    random_spd,
    rms_two_pass,
)

M, G = 95e-6, 9.81


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    conftest.ACCEPTANCE_LINES[n] = line
    print(line)
    return ok


def _strip_timestamp(text):
    return "\n".join(line for line in text.splitlines() if '"generated_at"' not in line)


# --- shared runs ------------------------------------------------------------------


@pytest.fixture(scope="module")
def exact_span_trial():
    cfg = builtin_config("exact_span")
    spec = cfg.trial_specs("adaptive", cfg.build_design())[0]
    t0 = time.perf_counter()
    res = run_trial(spec)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def default_compare(tmp_path_factory):
    out = tmp_path_factory.mktemp("compare_a")
    t0 = time.perf_counter()
    code = main(["compare", "--out", str(out)])
    return code, out, time.perf_counter() - t0


# --- criteria ---------------------------------------------------------------------


def test_criterion_1_certificate(tmp_path):
    t0 = time.perf_counter()
    code = main(["certify", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    with open(tmp_path / "certificate.json") as fh:
        cert = json.load(fh)
    ok = (
        code == 0
        and abs(cert["spectral_abscissa"] + 6.0) <= 1e-6
        and cert["relative_residual"] <= 1e-10
        and elapsed < 1.0
    )
    record(
        1,
        ok,
        f"abscissa {cert['spectral_abscissa']:.9f}, residual/||Q|| {cert['relative_residual']:.2e} (<= 1e-10), "
        f"runtime {elapsed:.3f} s (< 1 s)",
    )
    assert ok


def test_criterion_2_exact_span_cancellation(exact_span_trial):
    res, elapsed = exact_span_trial
    tel = res.telemetry
    zn = np.linalg.norm(tel.z_tilde, axis=1)
    z_ratio = zn[-1] / zn.max()
    w_ratio = res.Wdot_terminal / tel.Wdot_fro.max()
    ok = not res.failed and z_ratio <= 1e-3 and w_ratio <= 1e-3 and elapsed < 10.0
    record(
        2,
        ok,
        f"|z~(T)|/peak {z_ratio:.2e}, terminal avg |W^dot|/peak {w_ratio:.2e} (both <= 1e-3), runtime {elapsed:.2f} s (< 10 s)",
    )
    assert ok


def test_criterion_3_lyapunov_monotonicity(exact_span_trial):
    res, _ = exact_span_trial
    tel = res.telemetry
    V, Vdot = tel.V, tel.Vdot
    h = float(tel.t[1] - tel.t[0])
    max_rise = float(np.max(np.diff(V)))
    # sixth-order centered difference
    fd = (-V[:-6] + 9 * V[1:-5] - 45 * V[2:-4] + 45 * V[4:-2] - 9 * V[5:-1] + V[6:]) / (60 * h)
    ref = Vdot[3:-3]
    mask = np.abs(ref) > 1e-12
    rel = float(np.max(np.abs(fd[mask] - ref[mask]) / np.abs(ref[mask])))
    ok = tel.V_complete and max_rise <= 1e-9 and rel <= 1e-4
    record(3, ok, f"max step increase of V {max_rise:.2e} (<= 1e-9), centered-difference vs -z~'Qz~ max rel err {rel:.2e} (<= 1e-4)")
    assert ok


def test_criterion_4_signal_chasing(exact_span_trial):
    res, _ = exact_span_trial
    tel = res.telemetry
    h = float(tel.t[1] - tel.t[0])
    integral = simpson(-tel.Vdot, dx=h)
    drop = tel.V[0] - tel.V[-1]
    err = abs(drop - integral) / tel.V[0]
    ok = tel.V_complete and err <= 1e-6
    record(4, ok, f"|V(0) - V(T) - int z~'Qz~ dt| / V(0) = {err:.2e} (<= 1e-6)")
    assert ok


@pytest.mark.slow
def test_criterion_5_paired_improvement(default_compare):
    code, out, elapsed = default_compare
    with open(out / "comparison.json") as fh:
        comp = json.load(fh)
    red = [comp["comparison"]["reduction_percent"][a] for a in ("n1", "n2", "n3")]
    numeric = all(isinstance(r, float) for r in red)
    ok = code == 0 and numeric and all(r > 0 for r in red) and max(red) >= 20.0 and elapsed < 120.0
    shown = ", ".join(f"{r:.1f} %" if isinstance(r, float) else str(r) for r in red)
    record(5, ok, f"reductions n1/n2/n3 {shown} (all > 0, one >= 20 %), runtime {elapsed:.1f} s (< 120 s)")
    assert ok


def test_criterion_6_oracle_equivalence():
    rng = np.random.default_rng(6)
    worst = {"phi": 0.0, "force": 0.0, "V": 0.0, "rms": 0.0}
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        net = RbfNetwork(rng.normal(size=(n, 6)), rng.uniform(0.1, 2.0, n))
        x = rng.normal(size=6)
        phi = eval_phi(x, net)
        worst["phi"] = max(worst["phi"], np.max(np.abs(phi - phi_loop(x, net.centers, net.bandwidths))))
        W = rng.normal(size=(n, 3))
        worst["force"] = max(worst["force"], np.max(np.abs(eval_force(W, phi) - force_loop(W, phi))))
        z = rng.normal(size=9)
        P = random_spd(rng)
        gamma = float(rng.uniform(0.1, 10.0))
        want = lyapunov_value_sum(z, W, P, gamma)
        worst["V"] = max(worst["V"], abs(lyapunov_value(z, W, P, gamma) - want) / max(1.0, abs(want)))
        samples = rng.normal(size=(int(rng.integers(1, 60)), 3))
        worst["rms"] = max(worst["rms"], np.max(np.abs(compute_rms(samples) - rms_two_pass(samples))))
    lyap = 0.0
    for _ in range(10):
        A = random_hurwitz(rng)
        Q = random_spd(rng)
        P_int = lyapunov_integral(A, Q)
        lyap = max(lyap, np.linalg.norm(solve_lyapunov(A, Q).P - P_int) / np.linalg.norm(P_int))
    ok = max(worst.values()) <= 1e-12 and lyap <= 1e-6
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    record(6, ok, f"max deviations over 1000 cases: {detail} (<= 1e-12); Lyapunov vs integral {lyap:.1e} (<= 1e-6)")
    assert ok


def _forced_endpoint(dt, T=1.0):
    p = PlantParams(M, G)
    force = lambda st, t: M * G * N3 + M * np.array([np.sin(3 * t), np.cos(2 * t), -st.r[2]])
    s = SimState([0.1, 0.0, 0.2], [0.0, 0.1, 0.0])
    for _ in range(int(round(T / dt))):
        s = rk4_step(s, dt, force, Zero(), p)
    return s.x


def test_criterion_7_integrator_order():
    ref = _forced_endpoint(1e-4)
    e1 = np.linalg.norm(_forced_endpoint(0.1) - ref)
    e2 = np.linalg.norm(_forced_endpoint(0.05) - ref)
    order = float(np.log2(e1 / e2))

    p = PlantParams(M, G)
    a = np.array([0.3, -0.2, 0.1])
    s0 = SimState([0.1, 0.0, -0.1], [0.0, 0.4, 0.2])
    s = s0
    for _ in range(100):
        s = rk4_step(s, 0.01, lambda st, t: M * (a + G * N3), Zero(), p)
    T = s.t
    exact = np.r_[s0.r + s0.v * T + 0.5 * a * T**2, s0.v + a * T]
    const_err = float(np.max(np.abs(s.x - exact) / np.abs(exact)))
    ok = 3.8 <= order <= 4.2 and const_err <= 1e-12
    record(7, ok, f"empirical order {order:.3f} (in [3.8, 4.2]), constant-acceleration rel err {const_err:.1e} (<= 1e-12)")
    assert ok


@pytest.mark.slow
def test_criterion_8_determinism(default_compare, tmp_path):
    _, out_a, _ = default_compare
    out_b = tmp_path / "compare_b"
    code = main(["compare", "--out", str(out_b)])
    a = _strip_timestamp((out_a / "comparison.json").read_text())
    b = _strip_timestamp((out_b / "comparison.json").read_text())
    ok = code == 0 and a == b
    record(8, ok, f"comparison JSON identical apart from the timestamp line: {a == b} ({len(a)} bytes)")
    assert ok
