from dataclasses import replace

import numpy as np
import pytest

from conftest import make_logistic, make_quadratic
from fedback import (
    ContractViolationError,
    Objective,
    ProxProblem,
    RunConfig,
    SamplerSpec,
    fedadmm_round,
    fedavg_local,
    fedprox_local,
    init_states,
    prox_residual,
    run_experiment,
    sample_uniform,
)


class TestSampleUniform:
    def test_full_rate_selects_everyone(self):
        rng = np.random.default_rng(0)
        assert sample_uniform(7, 1.0, rng) == set(range(7))

    def test_draw_count_rounds_up(self):
        rng = np.random.default_rng(0)
        picks = sample_uniform(100, 0.05, rng)
        assert len(picks) == 5
        assert all(0 <= i < 100 for i in picks)

    def test_inclusion_frequency_is_uniform(self):
        # 10,000 draws of 10 from 100: every client lands near rate 0.1.
        rng = np.random.default_rng(123)
        counts = np.zeros(100)
        draws = 10_000
        for _ in range(draws):
            for i in sample_uniform(100, 0.1, rng):
                counts[i] += 1
        freq = counts / draws
        assert freq.min() >= 0.08
        assert freq.max() <= 0.12

    def test_rate_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ContractViolationError):
            sample_uniform(10, 0.0, rng)
        with pytest.raises(ContractViolationError):
            sample_uniform(10, 1.1, rng)

    def test_sampler_spec(self):
        spec = SamplerSpec(rate=0.25, seed=3)
        assert spec.draws_per_round(10) == 3
        first = sample_uniform(10, spec.rate, spec.make_rng())
        second = sample_uniform(10, spec.rate, spec.make_rng())
        assert first == second
        with pytest.raises(ContractViolationError):
            SamplerSpec(rate=0.0)
        with pytest.raises(ContractViolationError):
            SamplerSpec(rate=0.5, scheme="poisson")


class TestFedavgLocal:
    def test_zero_objective_returns_omega(self):
        obj = Objective.quadratic(np.zeros((1, 2)), np.zeros(1))
        omega = np.array([1.0, -2.0])
        assert np.array_equal(fedavg_local(obj, omega, steps=5, lr=0.3), omega)

    def test_single_gradient_step(self):
        obj = Objective.quadratic([[1.0]], [3.0])
        assert fedavg_local(obj, np.zeros(1), steps=1, lr=0.5) == pytest.approx([1.5])

    def test_many_steps_approach_minimizer(self):
        obj = Objective.quadratic([[1.0]], [3.0])
        theta = fedavg_local(obj, np.zeros(1), steps=100, lr=1.0 / obj.smoothness_constant())
        assert theta == pytest.approx([3.0], abs=1e-6)

    def test_validation(self):
        obj = Objective.quadratic([[1.0]], [3.0])
        with pytest.raises(ContractViolationError):
            fedavg_local(obj, np.zeros(1), steps=0, lr=0.1)
        with pytest.raises(ContractViolationError):
            fedavg_local(obj, np.zeros(1), steps=1, lr=0.0)


class TestFedproxLocal:
    def test_zero_objective_returns_omega(self):
        obj = Objective.quadratic(np.zeros((1, 2)), np.zeros(1))
        omega = np.array([0.4, 0.6])
        assert fedprox_local(obj, omega, mu=1.0, eps=1e-10) == pytest.approx(omega)

    def test_scalar_closed_form(self):
        obj = Objective.quadratic([[1.0]], [3.0])
        assert fedprox_local(obj, np.zeros(1), mu=1.0, eps=1e-12) == pytest.approx([1.5])

    def test_residual_contract(self):
        rng = np.random.default_rng(6)
        for trial in range(5):
            obj = make_logistic(trial)
            omega = rng.standard_normal(obj.dim)
            theta = fedprox_local(obj, omega, mu=0.8, eps=1e-7)
            prob = ProxProblem(anchor=omega, rho=0.8, tolerance=1e-7, warm_start=omega)
            assert prox_residual(obj, prob, theta) <= 1e-7


class TestFedadmmRound:
    def test_full_rate_matches_pinned_trajectory(self):
        objectives = [make_quadratic(s, n=10, d=3) for s in range(5)]
        sampled = RunConfig(n_clients=5, n_rounds=50, rho=1.0, targets=1.0, algorithm="fedadmm")
        pinned = replace(sampled, algorithm="fedback", pin_threshold_zero=True)
        t_sampled = run_experiment(sampled, objectives=objectives)
        t_pinned = run_experiment(pinned, objectives=objectives)
        for a, b in zip(t_sampled, t_pinned):
            assert a.selected == b.selected
            assert a.omega_norm == b.omega_norm
            assert a.grad_norm_global == b.grad_norm_global
            assert a.lagrangian == b.lagrangian
            assert a.F_theta == b.F_theta
            assert a.f_omega == b.f_omega

    def test_round_freezes_non_participants(self):
        objectives = [make_quadratic(s, n=8, d=2) for s in range(2)]
        cfg = RunConfig(n_clients=2, n_rounds=10, rho=1.0, targets=0.1, algorithm="fedadmm")
        server, clients, controllers, rng = init_states(cfg, objectives)
        trace = fedadmm_round(server, clients, objectives, cfg, rng)
        assert len(trace.selected) == 1
        idle = 1 - trace.selected[0]
        assert np.array_equal(clients[idle].theta, np.zeros(2))
        assert np.array_equal(server.z_cache[idle], np.zeros(2))

    def test_deterministic_given_seed(self):
        objectives = [make_quadratic(s, n=8, d=2) for s in range(4)]
        cfg = RunConfig(n_clients=4, n_rounds=25, rho=1.0, targets=0.5, algorithm="fedadmm", seed=5)
        assert run_experiment(cfg, objectives=objectives) == run_experiment(
            cfg, objectives=objectives
        )

    def test_long_run_reaches_shared_optimum(self):
        objectives = [make_quadratic(s, n=12, d=2) for s in range(4)]
        from fedback import quadratic_optimum

        _, f_star = quadratic_optimum(objectives)
        sampled = RunConfig(
            n_clients=4, n_rounds=400, rho=2.0, targets=0.5, algorithm="fedadmm", seed=1
        )
        event = replace(sampled, algorithm="fedback")
        loss_sampled = run_experiment(sampled, objectives=objectives)[-1].f_omega
        loss_event = run_experiment(event, objectives=objectives)[-1].f_omega
        assert loss_sampled == pytest.approx(f_star, abs=1e-4)
        assert loss_event == pytest.approx(f_star, abs=1e-4)


class TestBaselineRecovery:
    def test_fedprox_matches_event_primal_when_duals_vanish(self):
        # At round zero every dual is zero, so the FedProx solve with
        # mu = rho reproduces the consensus primal update exactly.
        objectives = [make_quadratic(s, n=10, d=3) for s in range(3)]
        cfg = RunConfig(n_clients=3, n_rounds=1, rho=1.3, pin_threshold_zero=True)
        server, clients, controllers, rng = init_states(cfg, objectives)
        omega0 = server.omega.copy()
        from fedback import run_round

        run_round(server, clients, controllers, objectives, cfg, rng)
        for i, obj in enumerate(objectives):
            direct = fedprox_local(obj, omega0, mu=1.3, eps=cfg.epsilon_at(0))
            assert np.array_equal(clients[i].theta, direct)

    def test_fedavg_run_executes_and_averages_participants(self):
        objectives = [make_quadratic(s, n=10, d=2) for s in range(4)]
        cfg = RunConfig(
            n_clients=4, n_rounds=5, rho=1.0, targets=0.5, algorithm="fedavg", seed=2
        )
        trace = run_experiment(cfg, objectives=objectives)
        assert all(row.selected_count == 2 for row in trace)
        server, clients, controllers, rng = init_states(cfg, objectives)
        from fedback import run_round

        row = run_round(server, clients, controllers, objectives, cfg, rng)
        locals_ = [
            fedavg_local(objectives[i], np.zeros(2), cfg.fedavg_steps, 1.0 / objectives[i].smoothness_constant())
            for i in row.selected
        ]
        assert np.array_equal(server.omega, np.mean(np.stack(locals_), axis=0))
        for i in range(4):
            assert np.array_equal(clients[i].dual, np.zeros(2))

    def test_fedprox_run_uses_rho_as_default_mu(self):
        objectives = [make_quadratic(s, n=10, d=2) for s in range(3)]
        cfg = RunConfig(
            n_clients=3, n_rounds=4, rho=0.9, targets=1.0, algorithm="fedprox", seed=3
        )
        trace = run_experiment(cfg, objectives=objectives)
        assert trace[-1].selected_count == 3
