import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pacl.data import Dataset
from pacl.errors import DegenerateWeights, InvalidArgument
from pacl.model import linear_model
from pacl.principal import (
    PrincipalParams,
    PrincipalState,
    loss_bound,
    loss_bound_from_log,
    mixture_loss,
    normalize,
    performance_index,
    simulate_weights,
    update_weights,
)


class TestPerformanceIndex:
    def test_zero_loss(self, line_data):
        assert performance_index(linear_model(), [0.5, 2.0], line_data, 0.001) == 0.0

    def test_default_mu_at_loss_1000(self):
        # single point with residual sqrt(1000): mean loss 1000, mu*J = 1
        ds = Dataset([0.0], [math.sqrt(1000.0)])
        rho = performance_index(linear_model(), [0.0, 0.0], ds, 0.001)
        assert rho == pytest.approx(0.6321205588285577, rel=1e-14)

    def test_monotone_towards_one_in_mu(self):
        ds = Dataset([0.0], [1.0])
        vals = [performance_index(linear_model(), [0.0, 0.0], ds, mu) for mu in (0.1, 1, 10, 30)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert 1 - vals[-1] < 1e-12

    def test_empty_test_set(self):
        with pytest.raises(InvalidArgument):
            performance_index(linear_model(), [0.0, 0.0], Dataset([], []), 1.0)

    @given(st.floats(-100, 100), st.floats(1e-6, 10))
    def test_in_unit_interval(self, offset, mu):
        ds = Dataset([0.0, 1.0], [offset, -offset])
        rho = performance_index(linear_model(), [0.0, 0.0], ds, mu)
        assert 0.0 <= rho <= 1.0
        if offset == 0.0:
            assert rho == 0.0


class TestUpdateWeights:
    def test_zero_rho_is_identity(self):
        a = np.array([0.3, 0.7])
        np.testing.assert_array_equal(update_weights(a, [0.0, 0.0], 0.5), a)

    def test_hand_computed(self):
        np.testing.assert_allclose(update_weights([0.5, 0.5], [1.0, 0.0], 0.5), [0.25, 0.5])

    def test_single_agent_telescopes(self):
        alpha = np.array([1.0])
        for _ in range(30):
            alpha = update_weights(alpha, [0.3], 0.7)
        np.testing.assert_allclose(alpha, [0.7 ** (30 * 0.3)], rtol=1e-13)

    @pytest.mark.parametrize("rho", [[-0.1, 0.0], [0.0, 1.01], [np.nan, 0.0]])
    def test_rho_outside_unit_interval(self, rho):
        with pytest.raises(InvalidArgument):
            update_weights([0.5, 0.5], rho, 0.5)

    def test_beta_range(self):
        with pytest.raises(InvalidArgument):
            update_weights([1.0], [0.5], 1.0)


class TestNormalize:
    def test_symmetric(self):
        np.testing.assert_allclose(normalize([0.2, 0.2]), [0.5, 0.5])

    def test_hand_computed(self):
        np.testing.assert_allclose(normalize([1.0, 3.0]), [0.25, 0.75])

    @given(st.floats(1e-200, 1e200))
    def test_scale_invariant(self, s):
        np.testing.assert_allclose(normalize([s, 3 * s]), [0.25, 0.75], rtol=1e-14)

    @pytest.mark.parametrize("alpha", [[0.0, 1.0], [-1.0, 2.0], [np.inf, 1.0], []])
    def test_degenerate(self, alpha):
        with pytest.raises(DegenerateWeights):
            normalize(alpha)


class TestMixtureLoss:
    def test_zero(self):
        assert mixture_loss([0.3, 0.7], [0.0, 0.0]) == 0.0

    def test_hand_computed(self):
        assert mixture_loss([0.5, 0.5], [0.2, 0.4]) == pytest.approx(0.3)

    def test_degenerate_weight(self):
        assert mixture_loss([1.0, 0.0], [0.7, 0.123]) == 0.7

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            mixture_loss([1.0], [0.1, 0.2])

    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_between_extremes(self, K, seed):
        rng = np.random.default_rng(seed)
        pi, rho = rng.dirichlet(np.ones(K)), rng.uniform(size=K)
        L = mixture_loss(pi, rho)
        assert rho.min() - 1e-15 <= L <= rho.max() + 1e-15


class TestLossBound:
    def test_no_loss(self):
        assert loss_bound([0.25, 0.75], 0.5) == 0.0

    def test_hand_computed(self):
        assert loss_bound([math.exp(-1) / 2, math.exp(-1) / 2], 0.5) == pytest.approx(2.0)

    def test_log_form_agrees(self):
        alpha = np.array([0.01, 0.2, 0.003])
        assert loss_bound_from_log(np.log(alpha), 0.3) == pytest.approx(loss_bound(alpha, 0.3))

    def test_degenerate(self):
        with pytest.raises(DegenerateWeights):
            loss_bound([0.0, 0.0], 0.5)


class TestPrincipalState:
    def test_initial_uniform(self):
        s = PrincipalState.initial(4, PrincipalParams(0.5, 1.0))
        np.testing.assert_allclose(s.pi, 0.25)
        np.testing.assert_allclose(s.alpha, 0.25)

    def test_alpha0_must_be_on_simplex(self):
        with pytest.raises(InvalidArgument):
            PrincipalState.initial(2, PrincipalParams(0.5, 1.0), [0.5, 0.6])

    @pytest.mark.parametrize("beta,mu", [(0.0, 1.0), (1.0, 1.0), (1.5, 1.0), (0.5, 0.0)])
    def test_params_validated(self, beta, mu):
        with pytest.raises(InvalidArgument):
            PrincipalParams(beta, mu)

    def test_matches_plain_updates(self):
        rng = np.random.default_rng(5)
        rhos = rng.uniform(size=(40, 3))
        s = simulate_weights(rhos, 0.6)
        alpha = np.full(3, 1 / 3)
        for rho in rhos:
            alpha = update_weights(alpha, rho, 0.6)
        np.testing.assert_allclose(s.alpha, alpha, rtol=1e-12)
        np.testing.assert_allclose(s.pi, normalize(alpha), rtol=1e-12)
        assert s.bound() == pytest.approx(loss_bound(alpha, 0.6), rel=1e-12)
        assert s.cumulative_loss == pytest.approx(sum(s.step_losses), abs=1e-9)

    def test_survives_weight_underflow(self):
        rhos = np.tile([0.2, 1.0], (20_000, 1))
        s = simulate_weights(rhos, 0.5)
        assert np.all(s.alpha == 0.0)  # plain doubles have long underflowed
        assert abs(s.pi.sum() - 1) <= 1e-12 and s.pi[0] == 1.0
        assert math.isfinite(s.bound()) and s.bound_holds()

    def test_argmin_tracking(self):
        rho = np.array([0.3, 0.35, 0.6, 0.9])
        s = PrincipalState.initial(4, PrincipalParams(0.5, 1.0))
        prev = s.pi[0]
        for _ in range(1000):
            s.update(rho)
            # strictly increasing until it saturates at the last few ulps below 1
            assert s.pi[0] > prev or 1 - prev < 1e-12
            prev = s.pi[0]
        assert s.pi[0] > 1 - 1e-12

    @given(st.floats(1e-100, 1e100), st.integers(0, 2**32 - 1))
    def test_rescaling_alpha_leaves_pi_unchanged(self, s, seed):
        rng = np.random.default_rng(seed)
        alpha, rho = rng.uniform(0.1, 1, 5), rng.uniform(size=5)
        a = normalize(update_weights(alpha, rho, 0.4))
        b = normalize(update_weights(s * alpha, rho, 0.4))
        np.testing.assert_allclose(a, b, rtol=1e-12)
        assert np.argmax(a) == np.argmax(b)

    @settings(max_examples=200)
    @given(
        st.sampled_from([1, 2, 5, 10]),
        st.sampled_from([1, 10, 100]),
        st.floats(0.01, 0.99),
        st.integers(0, 2**32 - 1),
    )
    def test_cumulative_loss_never_exceeds_bound(self, K, N, beta, seed):
        rho = np.random.default_rng(seed).uniform(size=(N, K))
        s = simulate_weights(rho, beta)
        assert s.cumulative_loss <= s.bound() + 1e-9
        assert np.all(s.pi >= 0) and abs(s.pi.sum() - 1) <= 1e-12
