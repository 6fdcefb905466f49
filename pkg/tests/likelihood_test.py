import math

import numpy as np
import pytest

from src.Hawkes.compute.likelihood import log_likelihood, log_likelihood_batch
from src.Hawkes.simulation.simulator import simulate_cluster_process
from src.Hawkes.utils.errors import BatchEvaluationError, InvalidParamsError
from src.Hawkes.utils.pydantic_schemas import Backend, BackendKind, EventSet, Params, SimWindow
from tests.oracles import Phi, oracle_log_likelihood, phi, random_events, random_params


class TestLogLikelihood:

    def test_single_event_closed_form(self, unit_params, serial):
        events = EventSet(x=[0.0], y=[0.0], t=[1.0], window_end=1.0)
        expected = math.log(phi(0.0) ** 3) - (0.5 - Phi(-1.0))
        result = log_likelihood(events, unit_params, serial)
        assert result.valid
        assert result.log_lik == pytest.approx(expected, rel=1e-14)
        assert result.log_lik == pytest.approx(-3.0981603, abs=1e-7)

    def test_zero_theta_is_pure_background(self, rng, serial):
        events = random_events(30, rng)
        params = random_params(rng).model_copy(update={"theta": 0.0})
        mu0, tx, tt = params.mu0, params.tau_x, params.tau_t
        x, y, t = events.x.tolist(), events.y.tolist(), events.t.tolist()
        T = events.window_end
        expected = 0.0
        for n in range(len(t)):
            rate = mu0 * sum(
                phi((x[n] - x[m]) / tx) * phi((y[n] - y[m]) / tx) * phi((t[n] - t[m]) / tt) / (tx * tx * tt)
                for m in range(len(t))
            )
            expected += math.log(rate) - mu0 * (Phi((T - t[n]) / tt) - Phi(-t[n] / tt))
        assert log_likelihood(events, params, serial).log_lik == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("n_events", [2, 3, 10, 100])
    def test_matches_double_loop_oracle(self, n_events, rng, serial):
        for _ in range(5):
            events = random_events(n_events, rng)
            params = random_params(rng)
            assert log_likelihood(events, params, serial).log_lik == pytest.approx(
                oracle_log_likelihood(events, params), rel=1e-10
            )

    def test_backends_agree(self, rng, all_backends):
        events = random_events(1500, rng)
        params = random_params(rng)
        reference = log_likelihood(events, params, Backend()).log_lik
        for backend in all_backends:
            assert log_likelihood(events, params, backend).log_lik == pytest.approx(reference, rel=1e-10)

    def test_per_event_terms_sum_to_total(self, rng):
        events = random_events(200, rng)
        result = log_likelihood(
            events, random_params(rng), Backend(kind=BackendKind.THREADED, thread_count=4), keep_per_event=True
        )
        assert result.per_event.shape == (200,)
        assert abs(result.per_event.sum() - result.log_lik) <= 1e-12 * 200 * max(1.0, abs(result.log_lik))

    def test_per_event_terms_off_by_default(self, small_events, unit_params, serial):
        assert log_likelihood(small_events, unit_params, serial).per_event is None

    def test_overflowing_rate_is_invalid_not_an_error(self, serial):
        events = EventSet(x=[0.0, 1.0], y=[0.0, 0.0], t=[0.0, 1.0])
        params = Params(mu0=1.0, tau_x=1e-160, tau_t=1.0, theta=0.1, omega=1.0, h=1.0)
        result = log_likelihood(events, params, serial)
        assert not result.valid
        assert result.log_lik == -math.inf

    def test_invalid_params_raise(self, small_events, serial):
        bad = Params.model_construct(mu0=-1.0, tau_x=1.0, tau_t=1.0, theta=0.1, omega=1.0, h=1.0)
        with pytest.raises(InvalidParamsError):
            log_likelihood(small_events, bad, serial)

    def test_true_theta_beats_distant_values(self, serial):
        truth = Params(mu0=1.0, tau_x=1.6, tau_t=14.0, theta=0.4, omega=1.0, h=0.1)
        rng = np.random.default_rng(11)
        events = simulate_cluster_process(truth, SimWindow(t_end=365.0), 0.04, rng).events
        at_truth = log_likelihood(events, truth, serial).log_lik
        for theta in (truth.theta / 10, truth.theta * 10):
            assert at_truth > log_likelihood(events, truth.model_copy(update={"theta": theta}), serial).log_lik


class TestLogLikelihoodBatch:

    def test_matches_single_calls_bitwise(self, rng, serial):
        events = random_events(100, rng)
        params_list = [random_params(rng) for _ in range(3)]
        batch = log_likelihood_batch(events, params_list, serial)
        for params, result in zip(params_list, batch):
            assert result.log_lik == log_likelihood(events, params, serial).log_lik

    def test_duplicates_give_identical_results(self, small_events, unit_params, serial):
        first, second = log_likelihood_batch(small_events, [unit_params, unit_params], serial)
        assert first.log_lik == second.log_lik

    def test_empty_list_rejected(self, small_events, serial):
        with pytest.raises(ValueError):
            log_likelihood_batch(small_events, [], serial)

    def test_failure_reports_index(self, small_events, unit_params, serial):
        bad = Params.model_construct(mu0=1.0, tau_x=1.0, tau_t=1.0, theta=0.1, omega=float("nan"), h=1.0)
        with pytest.raises(BatchEvaluationError) as excinfo:
            log_likelihood_batch(small_events, [unit_params, bad, unit_params], serial)
        assert excinfo.value.index == 1
