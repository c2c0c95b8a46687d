"""Generator structure, time integration, resolvent, and decay fitting."""

import math

import numpy as np
import pytest
import scipy.linalg

from platelab.plate import assemble, make_grid, spectrum
from platelab.semigroup import (
    EnergyLog,
    MidpointStepper,
    StateVector,
    build_generator,
    decay_fit,
    energy,
    halfplane_check,
    hdot_inner,
    hdot_norm,
    kernel_projection,
    reduced_generator,
    resolvent_norm,
    resolvent_sweep,
    simulate,
    step,
)

N = 80
GRID = make_grid(N)


def bump_alpha(op, lo=0.3, hi=0.5, height=1.0):
    x = op.nodes[:, 0]
    return np.where((x >= lo) & (x <= hi), height, 0.0)


@pytest.fixture(scope="module")
def clamped_gen():
    op = assemble(GRID, "clamped")
    return build_generator(op, bump_alpha(op))


@pytest.fixture(scope="module")
def neumann_gen():
    op = assemble(GRID, "neumann_pair")
    return build_generator(op, bump_alpha(op))


class TestBuildGenerator:
    def test_clamped_has_no_projection_data(self, clamped_gen):
        assert clamped_gen.kernel_dim == 0

    def test_neumann_normalization(self, neumann_gen):
        # phi_0 = constant / sqrt(<alpha 1, 1>)
        gen = neumann_gen
        assert gen.kernel_dim == 1
        w = gen.op.weight
        mass = w * float(gen.alpha.sum())
        expect = 1.0 / math.sqrt(mass)
        assert np.allclose(gen.kernel_damped[:, 0], expect, rtol=1e-10)
        G = w * gen.kernel_damped.T @ (gen.alpha[:, None] * gen.kernel_damped)
        assert np.abs(G - np.eye(1)).max() <= 1e-10

    def test_zero_damping_with_kernel_rejected(self):
        op = assemble(GRID, "neumann_pair")
        with pytest.raises(ValueError, match="Gram"):
            build_generator(op, np.zeros(op.size))

    def test_negative_damping_rejected(self):
        op = assemble(GRID, "clamped")
        with pytest.raises(ValueError, match="nonnegative"):
            build_generator(op, -bump_alpha(op))

    def test_observation_region_floor(self):
        op = assemble(GRID, "clamped")
        gen = build_generator(op, bump_alpha(op), obs=(0.35, 0.45), delta=0.5)
        assert gen.delta >= 0.5
        with pytest.raises(ValueError, match="observation"):
            build_generator(op, bump_alpha(op), obs=(0.1, 0.2), delta=0.5)


class TestProjections:
    def test_projector_algebra(self, neumann_gen, rng):
        gen = neumann_gen
        for _ in range(30):
            Y = StateVector(rng.normal(size=gen.size), rng.normal(size=gen.size))
            Yn, Yd = kernel_projection(Y, gen)
            assert np.allclose(Yn.y + Yd.y, Y.y, atol=1e-12)
            Yn2, _ = kernel_projection(Yn, gen)
            assert np.abs(Yn2.y - Yn.y).max() <= 1e-10 * max(np.abs(Yn.y).max(),
                                                             1e-30)
            _, Yd2 = kernel_projection(Yd, gen)
            assert np.abs(gen.functionals(Yd)).max() <= 1e-10

    def test_kernel_state_projects_to_itself(self, neumann_gen):
        gen = neumann_gen
        phi0 = gen.kernel_damped[:, 0]
        Y = StateVector(phi0, np.zeros_like(phi0))
        assert gen.functionals(Y)[0] == pytest.approx(1.0, rel=1e-12)
        Yn, Yd = kernel_projection(Y, gen)
        assert np.abs(Yn.y - phi0).max() <= 1e-12
        assert np.abs(Yd.y).max() <= 1e-12

    def test_range_A_annihilated(self, neumann_gen, rng):
        # F(AY) = 0: measured against the size of AY, since the functional
        # sees cancellation noise at eps |P| from the stiff block
        gen = neumann_gen
        for _ in range(30):
            Y = StateVector(rng.normal(size=gen.size), rng.normal(size=gen.size))
            AY = gen.apply_A(Y)
            defect = np.abs(gen.functionals(AY)).max()
            assert defect <= 1e-10 * hdot_norm(gen, AY)

    def test_identity_when_kernel_empty(self, clamped_gen, rng):
        Y = StateVector(rng.normal(size=clamped_gen.size),
                        rng.normal(size=clamped_gen.size))
        Yn, Yd = kernel_projection(Y, clamped_gen)
        assert np.abs(Yn.y).max() == 0.0
        assert np.all(Yd.y == Y.y)


class TestEnergy:
    def test_velocity_only_state(self, clamped_gen, rng):
        v = rng.normal(size=clamped_gen.size)
        Y = StateVector(np.zeros_like(v), v)
        assert energy(Y, clamped_gen) == pytest.approx(
            0.5 * clamped_gen.op.norm(v) ** 2, rel=1e-12)

    def test_kernel_state_invisible(self, neumann_gen):
        gen = neumann_gen
        phi0 = gen.kernel_damped[:, 0]
        Y = StateVector(phi0, np.zeros_like(phi0))
        scale = np.abs(gen.op.matrix.data).max() * float(phi0 @ phi0)
        assert abs(energy(Y, gen)) <= 1e-12 * scale

    def test_two_route_identity(self, neumann_gen, rng):
        gen = neumann_gen
        for _ in range(30):
            Y = StateVector(rng.normal(size=gen.size), rng.normal(size=gen.size))
            _, Yd = kernel_projection(Y, gen)
            e1 = energy(Y, gen)
            e2 = 0.5 * hdot_norm(gen, Yd) ** 2
            assert e1 == pytest.approx(e2, rel=1e-10)


class TestStepper:
    def test_single_mode_frequency(self):
        op = assemble(make_grid(120), "hinged")
        gen = build_generator(op, np.zeros(op.size))
        mu, V = spectrum(op, 2)
        omega = math.sqrt(mu[0])
        dt = 1e-3
        Y = StateVector(V[:, 0], np.zeros(op.size))
        probe = int(np.argmax(np.abs(V[:, 0])))
        crossings = []
        prev = Y.y[probe]
        stepper = MidpointStepper(gen, dt)
        for k in range(1, int(2.5 * 2 * math.pi / omega / dt)):
            Y, _ = stepper.advance(Y)
            cur = Y.y[probe]
            if prev > 0 >= cur or prev < 0 <= cur:
                frac = prev / (prev - cur)
                crossings.append((k - 1 + frac) * dt)
            prev = cur
        period = 2 * (crossings[-1] - crossings[0]) / (len(crossings) - 1)
        omega_obs = 2 * math.pi / period
        assert omega_obs == pytest.approx(omega, rel=1e-4)

    def test_kernel_fixed_point(self, neumann_gen):
        gen = neumann_gen
        phi0 = gen.kernel_damped[:, 0]
        Y = StateVector(phi0, np.zeros_like(phi0))
        dt = 0.7
        Y1 = step(Y, gen, dt)
        # P phi0 cancels to eps * |P| * |phi0| in the matvec; the step can
        # move the state by no more than the propagated solve noise
        floor = 50 * np.finfo(float).eps * np.abs(gen.op.matrix.data).max() \
            * np.abs(phi0).max() * dt ** 2
        assert np.abs(Y1.y - Y.y).max() <= floor
        assert np.abs(Y1.v).max() <= floor

    def test_dissipation_identity(self, clamped_gen):
        gen = clamped_gen
        mu, V = spectrum(gen.op, 3)
        Y = StateVector(V[:, 0] + 0.2 * V[:, 2], np.zeros(gen.size))
        for dt in (1e-2, 5e-3):
            stepper = MidpointStepper(gen, dt)
            Z = Y.copy()
            for _ in range(50):
                e_before = energy(Z, gen)
                Z, diss = stepper.advance(Z)
                e_after = energy(Z, gen)
                lhs = (e_after - e_before) / dt
                assert lhs == pytest.approx(-diss, rel=1e-7, abs=1e-9 * e_before)

    def test_undamped_hdot_isometry(self, rng):
        op = assemble(GRID, "clamped")
        gen = build_generator(op, np.zeros(op.size))
        Y = StateVector(rng.normal(size=op.size), rng.normal(size=op.size))
        n0 = hdot_norm(gen, Y)
        Y1 = step(Y, gen, 0.05)
        assert hdot_norm(gen, Y1) == pytest.approx(n0, rel=1e-10)

    def test_dt_validation(self, clamped_gen):
        with pytest.raises(ValueError):
            MidpointStepper(clamped_gen, 0.0)


class TestSimulate:
    def test_undamped_conservation_1000_steps(self):
        op = assemble(GRID, "hinged")
        gen = build_generator(op, np.zeros(op.size))
        mu, V = spectrum(op, 2)
        Y0 = StateVector(V[:, 0] + V[:, 1], np.zeros(op.size))
        log, _ = simulate(Y0, gen, T=1.0, dt=1e-3)
        drift = abs(log.energies[-1] - log.energies[0]) / log.energies[0]
        assert drift <= 1e-8

    def test_damped_strict_decay(self, clamped_gen):
        gen = clamped_gen
        mu, V = spectrum(gen.op, 2)
        Y0 = StateVector(V[:, 0], np.zeros(gen.size))
        log, _ = simulate(Y0, gen, T=5.0, dt=0.01)
        log.validate()
        assert log.energies[-1] < 0.95 * log.energies[0]

    def test_kernel_component_constant(self, neumann_gen):
        gen = neumann_gen
        x = gen.op.nodes[:, 0]
        phi0 = gen.kernel_damped[:, 0]
        Y0 = StateVector(0.4 * phi0 + np.sin(math.pi * x) ** 2,
                         np.cos(2 * math.pi * x))
        f0 = gen.functionals(Y0)
        log, Yend = simulate(Y0, gen, T=5.0, dt=0.01)
        fT = gen.functionals(Yend)
        # drift is limited by eps |P| cancellation per step
        scale = np.abs(gen.op.matrix.data).max() * np.finfo(float).eps
        nsteps = log.meta["nsteps"]
        assert np.abs(fT - f0).max() <= 10 * scale * nsteps * log.dt + 1e-10

    def test_ledger_closure(self, clamped_gen):
        gen = clamped_gen
        mu, V = spectrum(gen.op, 2)
        Y0 = StateVector(V[:, 0] + 0.5 * V[:, 1], np.zeros(gen.size))
        closures = []
        for dt in (0.02, 0.01):
            log, _ = simulate(Y0, gen, T=2.0, dt=dt)
            closures.append(abs(log.total_dissipated()
                                - (log.energies[0] - log.energies[-1]))
                            / log.energies[0])
        # identity is exact for the midpoint ledger, far below O(dt^2)
        assert all(c <= 1e-10 for c in closures)

    def test_blowup_detection(self, clamped_gen):
        gen = clamped_gen
        bad = StateVector(np.full(gen.size, np.nan), np.zeros(gen.size))
        with pytest.raises(FloatingPointError):
            simulate(bad, gen, T=0.1, dt=0.01)

    def test_energy_log_validation_catches_growth(self):
        log = EnergyLog(np.array([0.0, 1.0]), np.array([1.0, 1.5]),
                        np.zeros(2), 1.0)
        with pytest.raises(AssertionError):
            log.validate()


class TestDecayFit:
    def test_rejects_stationary_data(self, neumann_gen):
        log = EnergyLog(np.array([0.0]), np.array([0.0]), np.zeros(1), 1.0)
        with pytest.raises(ValueError):
            decay_fit(log, 1, 0.0)

    def test_scaling_invariance(self, clamped_gen):
        gen = clamped_gen
        mu, V = spectrum(gen.op, 2)
        Y0 = StateVector(V[:, 0], np.zeros(gen.size))
        amp = hdot_norm(gen, gen.apply_A(Y0)) ** 2
        log, _ = simulate(Y0, gen, T=3.0, dt=0.05)
        C1 = decay_fit(log, 1, amp)
        Y2 = StateVector(2 * Y0.y, 2 * Y0.v)
        amp2 = hdot_norm(gen, gen.apply_A(Y2)) ** 2
        log2, _ = simulate(Y2, gen, T=3.0, dt=0.05)
        C2 = decay_fit(log2, 1, amp2)
        assert C1 == pytest.approx(C2, rel=1e-9)


class TestReducedGenerator:
    def test_dimension(self, neumann_gen, clamped_gen):
        assert reduced_generator(neumann_gen).dim == 2 * neumann_gen.size - 1
        assert reduced_generator(clamped_gen).dim == 2 * clamped_gen.size

    def test_apriori_bound(self, clamped_gen, neumann_gen, rng):
        # |(z - A)U| >= |Re z| |U| in the energy norm for Re z < 0
        for gen in (clamped_gen, neumann_gen):
            red = reduced_generator(gen)
            for _ in range(50):
                z = complex(-float(rng.uniform(0.05, 5.0)), rng.normal() * 3)
                u = rng.normal(size=red.dim) + 1j * rng.normal(size=red.dim)
                lhs = z * u - red.Ahat @ u
                nrm_lhs = math.sqrt(abs(np.vdot(lhs, red.Ghat @ lhs).real))
                nrm_u = math.sqrt(abs(np.vdot(u, red.Ghat @ u).real))
                assert nrm_lhs >= abs(z.real) * nrm_u * (1 - 1e-8)

    def test_halfplane_with_damping(self, clamped_gen, neumann_gen):
        assert halfplane_check(clamped_gen) > 0
        assert halfplane_check(neumann_gen) > 0
        assert halfplane_check(clamped_gen, count=10) > 0
        with pytest.raises(ValueError):
            halfplane_check(clamped_gen, count=10 ** 6)

    def test_undamped_spectrum_on_axis(self):
        op = assemble(GRID, "clamped")
        gen = build_generator(op, np.zeros(op.size))
        red = reduced_generator(gen)
        assert np.abs(red.eigenvalues.real).max() <= 1e-8 * \
            np.abs(red.eigenvalues.imag).max()

    def test_conjugate_pairs(self, clamped_gen):
        eigs = reduced_generator(clamped_gen).eigenvalues
        eigs_sorted = np.sort_complex(eigs)
        conj_sorted = np.sort_complex(eigs.conj())
        assert np.allclose(eigs_sorted, conj_sorted, rtol=1e-8, atol=1e-8)


class TestResolvent:
    def test_apriori_norm_bound(self, clamped_gen):
        nrm = resolvent_norm(clamped_gen, -1.0 + 0.4j)
        assert nrm <= 1.0 + 1e-9

    def test_far_negative_axis_decay(self, clamped_gen):
        for R in (10.0, 100.0):
            nrm = resolvent_norm(clamped_gen, complex(-R, 0.0))
            assert nrm <= 1.0 / R + 1e-12
            assert nrm >= 0.1 / R

    def test_matches_dense_svd(self, neumann_gen, rng):
        red = reduced_generator(neumann_gen)
        for _ in range(5):
            z = complex(rng.uniform(-2, -0.2), rng.uniform(-20, 20))
            nrm = resolvent_norm(neumann_gen, z)
            R = np.linalg.inv(z * np.eye(red.dim) - red.Ahat)
            T = red.L.T @ R @ np.linalg.inv(red.L.T)
            dense = np.linalg.svd(T, compute_uv=False)[0]
            assert nrm == pytest.approx(dense, rel=1e-6)

    def test_eigenvalue_proximity_raises(self, clamped_gen):
        lam = reduced_generator(clamped_gen).eigenvalues[0]
        with pytest.raises(ValueError):
            resolvent_norm(clamped_gen, complex(lam))

    def test_sweep_properties(self, clamped_gen):
        sweep = resolvent_sweep(clamped_gen, np.arange(0.0, 40.0, 1.0))
        assert np.all(np.isfinite(sweep.norms))
        assert sweep.C >= 0 and math.isfinite(sweep.C)
        assert not sweep.skipped
        # universal lower bound |R(z)| >= 1/dist(z, spectrum)
        assert np.all(sweep.norms >= (1 - 1e-6) / sweep.nearest_dist)
        assert np.nanmin(sweep.slack) >= -1e-9

    def test_sweep_includes_origin(self, neumann_gen):
        sweep = resolvent_sweep(neumann_gen, [0.0])
        assert math.isfinite(sweep.norms[0])

    def test_sweep_worker_independence(self, clamped_gen):
        grid = np.arange(0.0, 10.0, 0.5)
        s1 = resolvent_sweep(clamped_gen, grid, workers=1)
        s2 = resolvent_sweep(clamped_gen, grid, workers=4)
        assert np.array_equal(s1.norms, s2.norms)
