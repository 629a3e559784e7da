import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from contract_offload import AntiAdverseSelection, LinearPricing, PerfectDiscrimination


@pytest.mark.parametrize("cls", [PerfectDiscrimination, LinearPricing, AntiAdverseSelection])
def test_params_round_trip(cls):
    est = cls(c=0.02, valuation="power", alpha=0.4)
    assert est.get_params() == {"c": 0.02, "valuation": "power", "alpha": 0.4}
    assert clone(est).get_params() == est.get_params()


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        AntiAdverseSelection().transform([1.0])


def test_aas_fit_predict_transform():
    est = AntiAdverseSelection(c=0.01).fit([1.0, 1.5], [0.5, 0.5])
    np.testing.assert_allclose(est.T_, [625.0, 5625.0], rtol=1e-12)
    assert est.n_types_ == 2
    assert est.expected_bs_payoff_ == pytest.approx(31.25)
    np.testing.assert_allclose(est.multipliers_.mu, [1.0, 0.5])
    np.testing.assert_array_equal(est.predict([1.0, 1.5]), [1, 2])
    # an unseen high type takes the top bundle, a very low one the bottom
    np.testing.assert_array_equal(est.predict([0.5, 3.0]), [1, 2])
    P = est.transform([1.0, 1.5])
    np.testing.assert_allclose(P, [[0.0, -25.0], [12.5, 12.5]], atol=1e-9)
    assert est.verify().feasible


def test_uniform_default_beta():
    est = PerfectDiscrimination().fit([1.0, 2.0])
    assert est.config_.beta == (0.5, 0.5)
    assert est.expected_ap_payoff_ == pytest.approx(0.0, abs=1e-9)


def test_linear_pricing_estimator():
    est = LinearPricing(c=0.01).fit([1.0, 1.5])
    assert est.price_per_unit_ == pytest.approx(0.02)
    assert est.social_welfare_ > 0


def test_bad_input():
    with pytest.raises(ValueError):
        AntiAdverseSelection().fit([1.0, 1.5], [0.5, 0.2, 0.3])
    with pytest.raises(ValueError):
        AntiAdverseSelection().fit([1.0, np.nan])


def test_module_example():
    import doctest

    import contract_offload.estimators as mod
    assert doctest.testmod(mod).failed == 0
