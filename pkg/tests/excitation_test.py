import numpy as np
import pytest

from src.Hawkes.compute.excitation import excitation_probabilities, posterior_excitation, thin_indices
from src.Hawkes.compute.likelihood import log_likelihood
from src.Hawkes.core.kernels import compensator_term
from src.Hawkes.utils.errors import BatchEvaluationError
from src.Hawkes.utils.pydantic_schemas import Backend, BackendKind, EventSet, Params
from tests.oracles import oracle_excitation, oracle_rates, random_events, random_params


class TestExcitationProbabilities:

    def test_earliest_event_is_background(self, rng, serial):
        events = random_events(25, rng)
        result = excitation_probabilities(events, random_params(rng), serial)
        assert result.pi[0] == 0.0
        assert result.xi[0] == 0.0

    def test_zero_theta_gives_zero_everywhere(self, rng, serial):
        events = random_events(50, rng)
        params = random_params(rng).model_copy(update={"theta": 0.0})
        np.testing.assert_array_equal(excitation_probabilities(events, params, serial).pi, 0.0)

    def test_three_event_instance(self, serial):
        # two colocated events a day apart, one far away
        events = EventSet(x=[0.0, 0.0, 40.0], y=[0.0, 0.0, 40.0], t=[1.0, 2.0, 2.5], window_end=3.0)
        params = Params(mu0=0.5, tau_x=1.6, tau_t=14.0, theta=0.3, omega=1.0, h=0.2)
        result = excitation_probabilities(events, params, serial)
        np.testing.assert_allclose(result.pi, oracle_excitation(events, params), rtol=1e-12, atol=1e-300)
        assert result.pi[1] > 0.9
        assert result.pi[2] < 1e-12

    def test_rates_match_likelihood(self, rng, serial):
        events = random_events(60, rng)
        params = random_params(rng)
        result = excitation_probabilities(events, params, serial)
        mus, xis = oracle_rates(events.x.tolist(), events.y.tolist(), events.t.tolist(), params.as_array().tolist())
        np.testing.assert_allclose(result.mu + result.xi, np.add(mus, xis), rtol=1e-12)

        per_event = log_likelihood(events, params, serial, keep_per_event=True).per_event
        compensators = np.array([compensator_term(events[n], events.window_end, params) for n in range(len(events))])
        np.testing.assert_allclose(np.log(result.mu + result.xi) - compensators, per_event, rtol=1e-12, atol=1e-12)

    def test_bounds_and_zero_without_excitation(self, rng, all_backends):
        events = random_events(200, rng)
        params = random_params(rng)
        for backend in all_backends:
            result = excitation_probabilities(events, params, backend)
            assert np.all((result.pi >= 0.0) & (result.pi <= 1.0))
            np.testing.assert_array_equal(result.pi[result.xi == 0.0], 0.0)
            assert np.all(result.pi[result.xi > 1e-200] > 0.0)

    def test_simultaneous_events_are_symmetric(self, serial):
        params = Params(mu0=1.0, tau_x=1.0, tau_t=5.0, theta=0.5, omega=1.0, h=0.5)
        a = EventSet(x=[0.0, 0.1, 0.3], y=[0.0, 0.0, 0.2], t=[0.0, 1.0, 1.0])
        b = EventSet(x=[0.0, 0.3, 0.1], y=[0.0, 0.2, 0.0], t=[0.0, 1.0, 1.0])
        pi_a = excitation_probabilities(a, params, serial).pi
        pi_b = excitation_probabilities(b, params, serial).pi
        np.testing.assert_allclose(np.sort(pi_a), np.sort(pi_b), rtol=1e-14)


class TestPosteriorExcitation:

    def test_single_draw(self, small_events, unit_params, serial):
        posterior = posterior_excitation(small_events, [unit_params], serial, thin_to=1)
        np.testing.assert_array_equal(
            posterior.mean_pi, excitation_probabilities(small_events, unit_params, serial).pi
        )

    def test_identical_draws(self, small_events, unit_params, serial):
        single = excitation_probabilities(small_events, unit_params, serial).pi
        posterior = posterior_excitation(small_events, [unit_params, unit_params], serial)
        np.testing.assert_allclose(posterior.mean_pi, single, rtol=1e-15)

    def test_mean_is_column_mean_of_draws(self, rng):
        backend = Backend(kind=BackendKind.THREADED_VECTORIZED, thread_count=2, lane_width=4)
        events = random_events(200, rng)
        draws = [random_params(rng) for _ in range(10)]
        posterior = posterior_excitation(events, draws, backend)
        stacked = np.stack([excitation_probabilities(events, p, backend).pi for p in draws])
        np.testing.assert_array_equal(posterior.mean_pi, stacked.mean(axis=0))
        np.testing.assert_array_equal(posterior.per_draw, stacked)
        np.testing.assert_allclose(posterior.lower, np.quantile(stacked, 0.025, axis=0), rtol=1e-15)
        assert np.all((posterior.mean_pi >= 0) & (posterior.mean_pi <= 1))

    def test_thinning_is_even_and_bounded(self):
        indices = thin_indices(10_000, 1000)
        assert indices.size <= 1000
        assert indices[0] == 0 and indices[-1] == 9999
        assert np.all(np.diff(indices) > 0)
        np.testing.assert_array_equal(thin_indices(5, 1000), np.arange(5))
        with pytest.raises(ValueError):
            thin_indices(5, 0)

    def test_streams_to_disk(self, tmp_path, rng, serial):
        events = random_events(30, rng)
        draws = [random_params(rng) for _ in range(4)]
        path = tmp_path / "pi.npy"
        posterior = posterior_excitation(events, draws, serial, per_draw_path=str(path))
        assert posterior.per_draw is None
        on_disk = np.load(path)
        assert on_disk.shape == (4, 30)
        np.testing.assert_array_equal(posterior.mean_pi, on_disk.mean(axis=0))

    def test_memory_cap_forces_disk(self, rng, serial):
        events = random_events(30, rng)
        posterior = posterior_excitation(events, [random_params(rng) for _ in range(3)], serial, memory_cap=10)
        assert posterior.per_draw is None and posterior.per_draw_path is not None

    def test_failure_names_draw(self, small_events, unit_params, serial):
        bad = Params.model_construct(mu0=1.0, tau_x=-1.0, tau_t=1.0, theta=0.1, omega=1.0, h=1.0)
        with pytest.raises(BatchEvaluationError) as excinfo:
            posterior_excitation(small_events, [unit_params, unit_params, bad], serial)
        assert excinfo.value.index == 2

    def test_empty_draws_rejected(self, small_events, serial):
        with pytest.raises(ValueError):
            posterior_excitation(small_events, [], serial)
