import math

import pytest
from hypothesis import given, settings, strategies as st

from qsdecay.params import (BarrierSpec, Envelope, FieldSpec, StateError, derive_state,
                            dimensionless, validity_report)

THIN = BarrierSpec(3.0, 0.0, 3.0)
THICK = BarrierSpec(4.0, 0.0, 10.0)


@pytest.mark.parametrize("barrier,E0,p0,k0", [
    (THIN, 1.217, 1.56014, 1.88838),
    (THICK, 1.302, 1.61369, 2.32294),
    (BarrierSpec(2.0, 0.0, 1.0), 1.0, math.sqrt(2), math.sqrt(2)),
])
def test_derive_state_examples(barrier, E0, p0, k0):
    s = derive_state(barrier, E0)
    # reference values are quoted to 5-6 digits
    assert s.p0 == pytest.approx(p0, abs=2e-5)
    assert s.kappa0 == pytest.approx(k0, abs=2e-5)


@pytest.mark.parametrize("E0", [0.0, -1.0, 3.0, 3.5])
def test_derive_state_rejects_non_quasistationary(E0):
    with pytest.raises(StateError, match="state not quasistationary"):
        derive_state(THIN, E0)


@given(U0=st.floats(0.1, 50.0), frac=st.floats(1e-3, 1 - 1e-3))
def test_momenta_identity(U0, frac):
    s = derive_state(BarrierSpec(U0, 0.0, 1.0), U0 * frac)
    assert s.p0 ** 2 + s.kappa0 ** 2 == pytest.approx(2 * U0, rel=1e-14)
    assert s.p0 ** 2 == pytest.approx(2 * s.E0, rel=1e-15)


def test_barrier_invariants():
    with pytest.raises(ValueError):
        BarrierSpec(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        BarrierSpec(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        BarrierSpec(1.0, -0.1, 1.0)
    with pytest.raises(ValueError):
        BarrierSpec(1.0, 0.0, 1.0, delta=-1)
    assert BarrierSpec(3, math.pi / 2, math.pi / 2 + 4).thickness == pytest.approx(4.0)


def test_field_invariants():
    with pytest.raises(ValueError):
        FieldSpec(-0.1, 0.1)
    with pytest.raises(ValueError):
        FieldSpec(0.1, 0.0)
    with pytest.raises(ValueError):
        FieldSpec(0.1, 0.1, Envelope.SIN_SQUARED, n_cycles=0)
    assert FieldSpec(0.1, 0.1, "pulse").envelope is Envelope.SIN_SQUARED
    assert FieldSpec(0.1, 0.1, phase=0.3) == FieldSpec(0.1, 0.1, phase=0.3 + 2 * math.pi)
    assert FieldSpec(0.1, 0.1).duration == math.inf
    assert FieldSpec(0.1, 0.057, "sin2", 6).duration == pytest.approx(12 * math.pi / 0.057)


def test_dimensionless_thin_example():
    s = derive_state(THIN, 1.217)
    d = dimensionless(s, FieldSpec(0.12, 0.1), THIN)
    assert d.mu == pytest.approx(0.12 * 9 / s.kappa0, rel=1e-15)
    assert d.mu == pytest.approx(0.57192, abs=1e-5)
    assert d.gammaK == pytest.approx(1.5737, abs=1e-4)
    assert d.pF == pytest.approx(1.2)
    assert d.Lpeaks_appendix == pytest.approx(2 * d.Lpeaks)


def test_dimensionless_thick_and_zero_field():
    s = derive_state(THICK, 1.302)
    assert dimensionless(s, FieldSpec(0.12, 0.1), THICK).mu == pytest.approx(5.166, abs=1e-3)
    d0 = dimensionless(s, FieldSpec(0.0, 0.1), THICK)
    assert (d0.pF, d0.zF, d0.mu) == (0.0, 0.0, 0.0)
    assert d0.gammaK == math.inf


@settings(max_examples=60)
@given(F=st.floats(1e-4, 0.5), w=st.floats(0.01, 1.0), E0=st.floats(0.1, 2.9))
def test_reiss_identity(F, w, E0):
    d = dimensionless(derive_state(THIN, E0), FieldSpec(F, w), THIN)
    assert d.zF == pytest.approx(8 * d.Fred ** 2 * d.K0 ** 3, rel=1e-12)
    assert d.Up == pytest.approx(d.pF ** 2 / 4, rel=1e-15)


@given(F1=st.floats(1e-3, 0.3), F2=st.floats(1e-3, 0.3), b1=st.floats(0.5, 10), b2=st.floats(0.5, 10))
def test_mu_monotone(F1, F2, b1, b2):
    s = derive_state(THIN, 1.217)
    mu = lambda F, b: dimensionless(s, FieldSpec(F, 0.1), b=b).mu
    if F1 < F2:
        assert mu(F1, 3.0) < mu(F2, 3.0)
    if b1 < b2:
        assert mu(0.05, b1) < mu(0.05, b2)


def _gate(gates, name):
    return next(g for g in gates if g.name == name)


def test_validity_exit_at_edge_examples():
    s = derive_state(THIN, 1.217)
    g = _gate(validity_report(THIN, s, FieldSpec(0.12, 0.1)), "exit_at_edge")
    assert g.passed and g.value == pytest.approx(0.36) and g.limit == pytest.approx(1.783, abs=1e-3)
    s = derive_state(THICK, 1.302)
    g = _gate(validity_report(THICK, s, FieldSpec(0.2, 0.1)), "exit_at_edge")
    assert g.passed and g.margin == pytest.approx(0.698, abs=1e-3)


def test_validity_zero_field_all_pass():
    s = derive_state(THIN, 1.217)
    gates = validity_report(THIN, s, FieldSpec(0.0, 0.1))
    for name in ("exit_at_edge", "exit_below_top", "peak_count", "weak_field_mu"):
        assert _gate(gates, name).passed
    assert all(g.line().startswith(("PASS", "WARN")) for g in gates)


def test_validity_warns_without_raising():
    s = derive_state(THIN, 1.217)
    gates = validity_report(THIN, s, FieldSpec(0.7, 0.1))
    assert not _gate(gates, "exit_at_edge").passed
    assert _gate(gates, "exit_at_edge").line().startswith("WARN")
