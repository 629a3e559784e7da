import numpy as np
import pytest

from contract_offload.economy import ContractMenu, EconomyConfig, Mechanism
from contract_offload.solvers import (
    solve_anti_adverse_selection,
    solve_linear_pricing,
    solve_perfect_discrimination,
)
from contract_offload.verifier import (
    check_ic,
    check_ir,
    check_monotonicity,
    check_self_revealing,
    payoff_matrix,
    payoff_table,
    verify_menu,
)


@pytest.fixture
def aas_menu(two_type):
    return solve_anti_adverse_selection(two_type)


def test_ic_matrix_entries(two_type, aas_menu):
    ic = check_ic(aas_menu, two_type)
    assert ic[1, 0] == pytest.approx(0.0, abs=1e-9)
    assert ic[0, 1] == pytest.approx(25.0, rel=1e-12)
    assert np.all(np.diag(ic) == 0.0)


def test_ir_slacks(two_type, aas_menu):
    np.testing.assert_allclose(check_ir(aas_menu, two_type), [0.0, 12.5], atol=1e-9)


def test_feasible_report(two_type, aas_menu):
    rep = verify_menu(aas_menu, two_type)
    assert rep.feasible and rep.self_revealing
    assert rep.monotone_T and rep.monotone_q and rep.monotone_V
    assert rep.violations() == []
    assert rep.choice == (1, 2)


def test_swapped_bundles_fail_ic(two_type, aas_menu):
    swapped = ContractMenu.from_arrays("aas", aas_menu.T[::-1], aas_menu.q[::-1])
    rep = verify_menu(swapped, two_type)
    assert not rep.ic_feasible
    assert not rep.feasible
    assert rep.worst_violation > 0
    assert rep.violations()


def test_pd_menu_is_ir_only(two_type):
    rep = verify_menu(solve_perfect_discrimination(two_type), two_type)
    assert rep.ir_feasible and rep.zero_payoffs
    assert not rep.ic_feasible


def test_identical_bundles_are_degenerate(two_type):
    menu = ContractMenu.from_arrays("aas", [625.0, 625.0], [25.0, 25.0])
    sr = check_self_revealing(menu, two_type)
    assert sr.degenerate
    assert sr.argmax_sets == ((1, 2), (1, 2))
    assert sr.self_revealing
    # the higher type still gains more from the shared bundle
    assert check_monotonicity(menu, two_type) == (False, False, True)


def test_tie_break_keeps_own_bundle(two_type, aas_menu):
    sr = check_self_revealing(aas_menu, two_type)
    # the top type is indifferent between both bundles (binding downward IC)
    assert sr.argmax_sets[1] == (1, 2)
    assert sr.choice == (1, 2)
    assert all(sr.unimodal)


def test_single_type_is_monotone():
    cfg = EconomyConfig((1.0,), (1.0,))
    assert check_monotonicity(ContractMenu.from_arrays("pd", [1.0], [1.0]), cfg) == (True, True, True)


def test_payoff_matrix_rejects_wrong_size(two_type):
    with pytest.raises(ValueError):
        payoff_matrix(ContractMenu.from_arrays("pd", [1.0], [0.0]), two_type)


def test_report_csv_and_summary(two_type, aas_menu):
    rep = verify_menu(aas_menu, two_type)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,theta,T,q,ir_slack,min_ic_slack,chosen_bundle"
    assert len(lines) == 3
    assert lines[1].startswith("1,1,625,")
    assert "feasible" in rep.summary().lower()


def test_payoff_table(two_type):
    menus = [
        solve_perfect_discrimination(two_type),
        solve_anti_adverse_selection(two_type),
        solve_linear_pricing(two_type).menu,
    ]
    res = payoff_table(menus, two_type)
    aas = Mechanism.ANTI_ADVERSE_SELECTION
    np.testing.assert_allclose(res.V[aas], [0.0, 12.5], atol=1e-9)
    np.testing.assert_allclose(res.U[aas], [18.75, 43.75], rtol=1e-12)
    for m in res.mechanisms:
        np.testing.assert_allclose(res.W[m], res.U[m] + res.V[m], rtol=1e-12)
        agg = res.aggregates[m]
        assert agg["welfare"] == pytest.approx(agg["bs_payoff"] + agg["ap_payoff"], rel=1e-12)
    assert res.price_per_unit == pytest.approx(0.02)
    assert res.selection_payoffs.shape == (2, 2)
