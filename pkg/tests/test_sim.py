import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from fracstab.model import MultiOrderSystem, RationalOrder, lift
from fracstab.sim import SimConfig, gl_weights, mittag_leffler, simulate, simulate_closed_loop, simulate_commensurate, write_csv
from fracstab.spectral import argument_stability_test
from fracstab.synthesis import ControllerRealization


def ml_oracle(alpha, z, dps):
    # plain 200-term summation at a fixed working precision
    with mpmath.workdps(dps):
        return mpmath.fsum(mpmath.mpf(z) ** k / mpmath.gamma(alpha * k + 1) for k in range(200))


class TestWeights:
    def test_first_difference(self):
        np.testing.assert_array_equal(gl_weights(1.0, 5), [1, -1, 0, 0, 0])

    def test_half(self):
        assert gl_weights(0.5, 2)[1] == -0.5

    def test_binomial_oracle(self):
        w = gl_weights(0.37, 30)
        ref = [float((-1) ** j * mpmath.binomial(0.37, j)) for j in range(30)]
        np.testing.assert_allclose(w, ref, rtol=1e-12, atol=1e-15)

    def test_partial_sums(self):
        alpha = 0.4
        S = np.cumsum(gl_weights(alpha, 2001))
        assert np.all(S[1:] > 0) and np.all(np.diff(S[1:]) < 0)
        # partial sums behave like K^-alpha / Gamma(1 - alpha)
        K = 2000
        assert S[K] == pytest.approx(K**-alpha / math.gamma(1 - alpha), rel=0.01)

    def test_count(self):
        with pytest.raises(ValueError):
            gl_weights(0.5, 0)


class TestMittagLeffler:
    def test_exponential(self):
        assert mittag_leffler(1, 1) == pytest.approx(math.e, rel=1e-14)
        assert mittag_leffler(1, -1) == pytest.approx(1 / math.e, rel=1e-14)

    def test_half_closed_form(self):
        # E_{1/2}(-x) = exp(x^2) erfc(x)
        for x in (0.5, 1.0, 2.0, 5.0):
            ref = float(mpmath.exp(x * x) * mpmath.erfc(x))
            assert mittag_leffler(0.5, -x) == pytest.approx(ref, rel=1e-11)

    def test_against_series_at_two_precisions(self):
        a = ml_oracle(0.5, -1, 30)
        b = ml_oracle(0.5, -1, 60)
        assert abs(a - b) < 1e-25
        assert mittag_leffler(0.5, -1) == pytest.approx(float(b), rel=1e-13)

    def test_guard(self):
        with pytest.raises(ValueError):
            mittag_leffler(0.5, -11)
        with pytest.raises(ValueError):
            mittag_leffler(2.0, 1)


class TestConfig:
    def test_defaults(self):
        c = SimConfig(step=0.1, t_final=1.0)
        assert c.memory_length == "full" and c.n_steps == 10

    @pytest.mark.parametrize("kw", [{"step": 0}, {"t_final": -1}, {"memory_length": 0}, {"scheme": "rk4"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**{"step": 0.1, "t_final": 1.0, **kw})


class TestScalar:
    def test_mittag_leffler_tracking(self):
        tr = simulate(MultiOrderSystem([[-1.0]], ["0.5"], x0=[1.0]), config=SimConfig(step=1e-3, t_final=2.0))
        for t in (0.5, 1.0, 2.0):
            k = int(round(t / 1e-3))
            assert abs(tr.states[k, 0] - mittag_leffler(0.5, -math.sqrt(t))) < 5e-3

    def test_first_order_convergence(self):
        s = MultiOrderSystem([[-1.0]], ["0.5"], x0=[1.0])
        errs = []
        for h in (2e-3, 1e-3):
            tr = simulate(s, config=SimConfig(step=h, t_final=1.0))
            errs.append(abs(tr.states[-1, 0] - mittag_leffler(0.5, -1.0)))
        assert errs[0] / errs[1] == pytest.approx(2.0, abs=0.4)

    def test_classical_exponential(self):
        tr = simulate(MultiOrderSystem([[-1.0]], ["1"], x0=[1.0]), config=SimConfig(step=1e-3, t_final=1.0))
        assert abs(tr.states[-1, 0] - math.exp(-1)) < 1e-3

    def test_implicit_scheme_agrees(self):
        s = MultiOrderSystem([[-1.0]], ["0.5"], x0=[1.0])
        tr = simulate(s, config=SimConfig(step=1e-3, t_final=1.0, scheme="implicit"))
        assert abs(tr.states[-1, 0] - mittag_leffler(0.5, -1.0)) < 5e-3

    def test_forced_response(self):
        # D^1 x = u with u = 1 gives x = t
        s = MultiOrderSystem([[0.0]], ["1"], [[1.0]], [[1.0]])
        tr = simulate(s, u=lambda t: [1.0], config=SimConfig(step=1e-2, t_final=1.0))
        np.testing.assert_allclose(tr.outputs[:, 0], tr.times, atol=1e-12)

    def test_input_array_shape_checked(self):
        s = MultiOrderSystem([[0.0]], ["1"], [[1.0]], [[1.0]])
        with pytest.raises(ValueError):
            simulate(s, u=np.zeros(5), config=SimConfig(step=0.1, t_final=1.0))


class TestTrajectory:
    def test_first_row_is_z0(self, ex3):
        tr = simulate(ex3, config=SimConfig(step=1e-2, t_final=0.5))
        np.testing.assert_array_equal(tr.states[0], lift(ex3).z0)
        assert tr.states.shape[0] == tr.times.shape[0] == 51

    def test_zero_state_zero_input(self, ex1):
        tr = simulate(ex1, config=SimConfig(step=1e-2, t_final=5.0))
        assert not tr.diverged and not np.any(tr.states)

    def test_example1_diverges(self):
        s = MultiOrderSystem([[1, 0, 1.5], [1, -2, 0.5], [1, 1, -3]], ["0.93", "1.55", "1.24"], x0=[1, 1, 1])
        tr = simulate(s, config=SimConfig(step=1e-2, t_final=200.0))
        assert tr.diverged and "divergence" in tr.diagnostic
        assert tr.states.shape[0] == tr.times.shape[0] < 20001

    def test_memory_truncation_changes_little(self, ex2):
        s = MultiOrderSystem(ex2.A, ex2.orders, x0=[1.0, 0.0])
        full = simulate(s, config=SimConfig(step=1e-2, t_final=5.0))
        short = simulate(s, config=SimConfig(step=1e-2, t_final=5.0, memory_length=400))
        assert np.max(np.abs(full.states - short.states)) < 0.05

    def test_rejects_large_base_order(self):
        real = lift(MultiOrderSystem([[-1.0]], ["1.5"]))
        with pytest.raises(ValueError):
            simulate_commensurate(real, None, SimConfig(step=0.1, t_final=1.0))


class TestClosedLoop:
    @pytest.mark.parametrize(
        "ctrl,scheme",
        [
            (ControllerRealization.static([[1.28]]), "explicit"),
            (ControllerRealization([[-21.78]], [[0.053]], [[2.46]], [[1.20]]), "implicit"),
        ],
    )
    def test_reference_decay(self, ex3, ctrl, scheme):
        tr = simulate_closed_loop(ex3, ctrl, SimConfig(step=1e-2, t_final=20.0, scheme=scheme))
        x = tr.pseudo_states[:, :2]
        assert not tr.diverged
        assert np.linalg.norm(x[-1]) < 0.05 * np.linalg.norm(x[0])

    def test_control_signal(self, ex3):
        ctrl = ControllerRealization.static([[1.28]])
        tr = simulate_closed_loop(ex3, ctrl, SimConfig(step=1e-2, t_final=1.0))
        np.testing.assert_allclose(tr.inputs[:, 0], 1.28 * tr.outputs[:, 0])
        np.testing.assert_allclose(tr.outputs[:, 0], -2 * tr.pseudo_states[:, 0])


def _random_stable(rng, n=2):
    while True:
        base = Fraction(int(rng.integers(2, 6)), 10)
        p = [int(v) for v in rng.integers(1, 4, size=n)]
        orders = [RationalOrder.from_fraction(base * q) for q in p]
        if any(o.fraction >= 2 for o in orders):
            continue
        s = MultiOrderSystem(rng.uniform(-2, 2, (n, n)), orders, x0=np.ones(n))
        real = lift(s)
        if real.alpha_c.fraction >= 1:
            continue
        # keep the explicit scheme inside its stability region at the coarsest step
        rho = max(abs(np.linalg.eigvals(real.Abig)))
        if rho * 0.01 ** float(real.alpha_c) > 0.5:
            continue
        if argument_stability_test(real, real.alpha_c.fraction).margin > 0.05:
            return s


def _gl_residual(system, h):
    tr = simulate(system, config=SimConfig(step=h, t_final=2.0))
    X = tr.pseudo_states
    worst = 0.0
    for i, o in enumerate(system.orders):
        a = float(o)
        w = gl_weights(a, X.shape[0])
        y = X[:, i] - X[0, i]
        for t in (1.0, 2.0):
            k = int(round(t / h))
            d = np.dot(w[: k + 1], y[k::-1]) / h**a
            worst = max(worst, abs(d - system.A[i] @ X[k]))
    return worst


def test_lifted_trajectories_solve_original_equations(rng):
    for _ in range(3):
        s = _random_stable(rng)
        r = [_gl_residual(s, h) for h in (1e-2, 5e-3, 2.5e-3)]
        assert r[2] < r[1] < r[0]
        # observed order on the finest pair
        assert 0.7 < math.log2(r[1] / r[2]) < 1.5


def test_stability_consistency(rng):
    for _ in range(6):
        n = 2
        base = Fraction(int(rng.integers(3, 9)), 10)
        p = [int(v) for v in rng.integers(1, 3, size=n)]
        orders = [RationalOrder.from_fraction(base * q) for q in p]
        if any(o.fraction >= 2 for o in orders):
            continue
        s = MultiOrderSystem(rng.uniform(-1, 1, (n, n)), orders, x0=np.ones(n))
        real = lift(s)
        if real.alpha_c.fraction >= 1:
            continue
        v = argument_stability_test(real, real.alpha_c.fraction)
        if abs(v.margin) < 0.05:
            continue
        tr = simulate(s, config=SimConfig(step=2e-2, t_final=50.0))
        if v.stable:
            assert not tr.diverged and np.max(np.abs(tr.states)) < 1e3
        else:
            late = np.linalg.norm(tr.states[-1])
            assert tr.diverged or late > np.linalg.norm(tr.states[len(tr.times) // 2])


def test_csv_format(ex3):
    tr = simulate_closed_loop(ex3, ControllerRealization.static([[1.28]]), SimConfig(step=0.5, t_final=1.0))
    text = write_csv(tr)
    lines = text.splitlines()
    assert lines[0] == "t,z_1,z_2,z_3,z_4,z_5,z_6,z_7,y_1,u_1"
    assert len(lines) == 4
    assert lines[1].split(",")[:2] == ["0", "1"]
    for row in lines[1:]:
        for cell in row.split(","):
            assert len(cell.lstrip("-").replace(".", "").split("e")[0].lstrip("0")) <= 10


def test_csv_marks_divergence():
    s = MultiOrderSystem([[3.0]], ["0.5"], x0=[1.0])
    tr = simulate(s, config=SimConfig(step=1e-2, t_final=100.0, threshold=1e6))
    assert tr.diverged
    assert write_csv(tr).splitlines()[-1].startswith("# diverged")
