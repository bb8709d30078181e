"""One test per acceptance criterion; each prints a PASS/FAIL line with measured values."""
from dfsaqc import acceptance


def _gate(result):
    print("\n" + result.line())
    assert result.passed, result.line()


def test_criterion_01_dfs_dimension():
    _gate(acceptance.dfs_dimension())


def test_criterion_02_pair_spectra():
    _gate(acceptance.pair_spectra())


def test_criterion_03_closed_form_grover():
    _gate(acceptance.closed_form_grover())


def test_criterion_04_trotter_saturation():
    _gate(acceptance.trotter_saturation())


def test_criterion_05_gap_schedule():
    _gate(acceptance.gap_schedule_shape())


def test_criterion_06_trotter_k_effect():
    _gate(acceptance.trotter_k_effect())


def test_criterion_07_krotov():
    _gate(acceptance.krotov_reaches_target())


def test_criterion_08_adjoint_gradient():
    _gate(acceptance.adjoint_gradient())


def test_criterion_09_self_protection():
    _gate(acceptance.self_protection())


def test_criterion_10_logical_full_equivalence():
    _gate(acceptance.logical_full_equivalence())


def test_criterion_11_cnot():
    _gate(acceptance.cnot_construction())


def test_sign_flip_correspondence():
    _gate(acceptance.sign_flip_correspondence())
