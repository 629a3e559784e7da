import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contract_offload.economy import (
    ContractBundle,
    ContractMenu,
    EconomyConfig,
    Mechanism,
    ValuationKind,
    ap_payoff,
    ap_payoffs,
    bs_payoff,
    bs_payoffs,
    inverse_marginal_valuation,
    social_welfare,
    solve_marginal_numeric,
    valuation,
    valuation_derivative,
    valuation_second_derivative,
)
from contract_offload.exceptions import DomainError, NoSolutionError

KINDS = [ValuationKind.square_root(), ValuationKind.log_one_plus(), ValuationKind.power(0.3),
         ValuationKind.power(0.75)]
GRID = np.logspace(-6, 6, 121)


@pytest.mark.parametrize("kind,T,expected", [
    (ValuationKind.square_root(), 0.0, 0.0),
    (ValuationKind.square_root(), 2500.0, 50.0),
    (ValuationKind.log_one_plus(), 0.0, 0.0),
    (ValuationKind.power(0.5), 0.0, 0.0),
])
def test_valuation_examples(kind, T, expected):
    assert valuation(kind, T) == expected


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_valuation_rejects_negative(kind):
    with pytest.raises(DomainError):
        valuation(kind, -1e-3)


@pytest.mark.parametrize("T,expected", [(2500.0, 0.01), (625.0, 0.02)])
def test_sqrt_derivative_examples(T, expected):
    assert valuation_derivative(ValuationKind.square_root(), T) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_derivative_rejects_boundary(kind):
    with pytest.raises(DomainError):
        valuation_derivative(kind, 0.0)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_shape_on_log_grid(kind):
    v = valuation(kind, GRID)
    dv = valuation_derivative(kind, GRID)
    assert np.all(np.diff(v) > 0)
    assert np.all(dv > 0)
    assert np.all(np.diff(dv) < 0)
    assert np.all(valuation_second_derivative(kind, GRID) < 0)


@pytest.mark.parametrize("kind", KINDS, ids=str)
@pytest.mark.parametrize("T", [1e-3, 0.7, 3.0, 625.0, 2500.0, 1e5])
def test_derivative_matches_central_difference(kind, T):
    h = T * 1e-5
    fd = (valuation(kind, T + h) - valuation(kind, T - h)) / (2 * h)
    assert valuation_derivative(kind, T) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_second_derivative_matches_central_difference(kind):
    for T in (0.5, 10.0, 1000.0):
        h = T * 1e-5
        fd = (valuation_derivative(kind, T + h) - valuation_derivative(kind, T - h)) / (2 * h)
        assert valuation_second_derivative(kind, T) == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("m,expected", [(0.01, 2500.0), (0.02, 625.0)])
def test_sqrt_inverse_examples(m, expected):
    assert inverse_marginal_valuation(ValuationKind.square_root(), m) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_round_trip_on_grid(kind):
    for T in GRID:
        back = inverse_marginal_valuation(kind, valuation_derivative(kind, T))
        assert back == pytest.approx(T, rel=1e-8)


@given(m=st.floats(1e-6, 0.999))
def test_log1p_inverse_round_trip(m):
    kind = ValuationKind.log_one_plus()
    assert valuation_derivative(kind, inverse_marginal_valuation(kind, m)) == pytest.approx(m, rel=1e-9)


@settings(max_examples=60)
@given(m=st.floats(1e-5, 0.99), idx=st.integers(0, len(KINDS) - 1))
def test_numeric_inverse_agrees_with_closed_form(m, idx):
    kind = KINDS[idx]
    T = solve_marginal_numeric(kind, m)
    assert abs(valuation_derivative(kind, T) - m) <= 1e-10 * m
    assert T == pytest.approx(inverse_marginal_valuation(kind, m), rel=1e-9)


def test_log1p_inverse_out_of_range():
    with pytest.raises(NoSolutionError):
        inverse_marginal_valuation(ValuationKind.log_one_plus(), 1.0)
    with pytest.raises(NoSolutionError):
        inverse_marginal_valuation(ValuationKind.square_root(), 0.0)


def test_ap_payoff_examples():
    sqrt = ValuationKind.square_root()
    assert ap_payoff(1.0, ContractBundle(0.0, 0.0), sqrt) == 0.0
    assert ap_payoff(1.5, ContractBundle(625.0, 25.0), sqrt) == pytest.approx(12.5)
    assert ap_payoff(1.0, ContractBundle(625.0, 25.0), sqrt) == pytest.approx(0.0, abs=1e-12)


def test_bs_payoff_examples():
    assert bs_payoff(ContractBundle(0.0, 0.0), 0.01) == 0.0
    assert bs_payoff(ContractBundle(2500.0, 50.0), 0.01) == pytest.approx(25.0)
    assert bs_payoff(ContractBundle(625.0, 25.0), 0.01) == pytest.approx(18.75)


def test_bundle_rejects_negative():
    with pytest.raises(ValueError):
        ContractBundle(-1.0, 0.0)
    with pytest.raises(ValueError):
        ContractBundle(1.0, -0.5)


def test_null_menu_has_zero_welfare(two_type):
    menu = ContractMenu.from_arrays("pd", [0, 0], [0, 0])
    assert social_welfare(menu, two_type) == 0.0


def test_welfare_length_mismatch(two_type):
    with pytest.raises(ValueError):
        social_welfare(ContractMenu.from_arrays("pd", [1.0], [0.5]), two_type)


@st.composite
def economies_and_menus(draw):
    K = draw(st.integers(1, 6))
    gaps = draw(st.lists(st.floats(0.01, 3.0), min_size=K, max_size=K))
    theta = np.cumsum(gaps)
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=K, max_size=K)))
    beta = w / w.sum()
    beta[-1] = 1.0 - beta[:-1].sum()
    c = draw(st.floats(1e-3, 0.5))
    cfg = EconomyConfig(tuple(theta), tuple(beta), c, KINDS[draw(st.integers(0, len(KINDS) - 1))])
    T = draw(st.lists(st.floats(0.0, 1e5), min_size=K, max_size=K))
    q = draw(st.lists(st.floats(0.0, 1e3), min_size=K, max_size=K))
    return cfg, ContractMenu.from_arrays(Mechanism.ANTI_ADVERSE_SELECTION, T, q)


@given(economies_and_menus())
def test_welfare_is_sum_of_expected_payoffs(pair):
    cfg, menu = pair
    beta = cfg.beta_array
    total = np.dot(beta, bs_payoffs(menu, cfg)) + np.dot(beta, ap_payoffs(menu, cfg))
    scale = max(1.0, float(np.max(np.abs(bs_payoffs(menu, cfg)))), float(np.max(menu.q)))
    assert abs(social_welfare(menu, cfg) - total) <= 1e-9 * scale


@pytest.mark.parametrize("kwargs,msg", [
    (dict(theta=(1.0, 1.0), beta=(0.5, 0.5)), "increasing"),
    (dict(theta=(2.0, 1.0), beta=(0.5, 0.5)), "increasing"),
    (dict(theta=(0.0, 1.0), beta=(0.5, 0.5)), "positive"),
    (dict(theta=(1.0, 2.0), beta=(0.6, 0.6)), "sum"),
    (dict(theta=(1.0, 2.0), beta=(1.0, 0.0)), "positive"),
    (dict(theta=(1.0, 2.0), beta=(0.5,)), "entries"),
    (dict(theta=(1.0,), beta=(1.0,), c=0.0), "c must"),
])
def test_config_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        EconomyConfig(**kwargs)


def test_default_config():
    cfg = EconomyConfig.default()
    assert cfg.K == 20
    assert cfg.theta == tuple(float(k) for k in range(1, 21))
    assert math.fsum(cfg.beta) == pytest.approx(1.0, abs=1e-12)
    assert cfg.c == 0.01
    assert cfg.valuation == ValuationKind.square_root()


@pytest.mark.parametrize("text,kind", [
    ("sqrt", ValuationKind.square_root()),
    ("log", ValuationKind.log_one_plus()),
    ("log1p", ValuationKind.log_one_plus()),
    ("power:0.25", ValuationKind.power(0.25)),
])
def test_parse_valuation(text, kind):
    assert ValuationKind.parse(text) == kind
    assert ValuationKind.parse(str(kind)) == kind


@pytest.mark.parametrize("text", ["power", "power:1.5", "cubic"])
def test_parse_valuation_errors(text):
    with pytest.raises(ValueError):
        ValuationKind.parse(text)
