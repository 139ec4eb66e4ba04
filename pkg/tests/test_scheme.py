import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartocloud.channel import RSRP_RANGE, RSSI_RANGE, Interface, MetricSample
from cartocloud.scheme import (
    DecisionContext,
    InterfaceContext,
    SchemeKind,
    SchemeParams,
    SensorPacket,
    TransmitBuffer,
    cat_probability,
    decide,
    multi_interface_probability,
    normalize_metric,
    pcat_probability,
    periodic_due,
)
from cartocloud.topology import ConfigurationError

P = SchemeParams()
LTE, WIFI = Interface.LTE, Interface.WIFI

thetas = st.floats(0.0, 1.0)
elapsed_mid = st.floats(10.0, 60.0, exclude_min=True, exclude_max=True)


class TestNormalize:
    def test_examples(self):
        assert normalize_metric(-140, RSRP_RANGE) == 0.0
        assert normalize_metric(-50, RSRP_RANGE) == 1.0
        assert normalize_metric(-95, RSRP_RANGE) == 0.5
        assert normalize_metric(-69.5, RSSI_RANGE) == 0.5

    def test_clamped(self):
        assert normalize_metric(-200, RSRP_RANGE) == 0.0
        assert normalize_metric(0, RSRP_RANGE) == 1.0


class TestCat:
    def test_examples(self):
        assert cat_probability(0.9, 5, P) == 0.0
        assert cat_probability(0.0, 70, P) == 1.0
        assert cat_probability(0.5, 30, P) == 0.00390625

    def test_boundaries(self):
        assert cat_probability(1.0, 10, P) == 0.0
        assert cat_probability(0.0, 60, P) == 1.0

    @settings(max_examples=300, deadline=None)
    @given(thetas, thetas, elapsed_mid)
    def test_monotone_in_theta(self, a, b, e):
        lo, hi = sorted((a, b))
        assert cat_probability(lo, e, P) <= cat_probability(hi, e, P)


class TestPcat:
    def test_reduces_to_cat(self):
        assert pcat_probability(0.5, 0.0, 30, P) == 0.00390625

    def test_improving_defers(self):
        assert pcat_probability(0.5, 10.0, 30, P) == 0.5 ** 120
        assert pcat_probability(0.5, 10.0, 30, P) == pytest.approx(7.5e-37, rel=0.01)

    def test_degrading_sends_earlier(self):
        assert pcat_probability(0.5, -10.0, 30, P) == 0.5 ** 3.2
        assert pcat_probability(0.5, -10.0, 30, P) == pytest.approx(0.1088, abs=1e-4)

    def test_boundaries(self):
        assert pcat_probability(1.0, -50, 10, P) == 0.0
        assert pcat_probability(0.0, 50, 60, P) == 1.0

    @settings(max_examples=500, deadline=None)
    @given(thetas, st.floats(-200, 200), st.floats(0, 100))
    def test_in_unit_interval(self, theta, dphi, e):
        assert 0.0 <= pcat_probability(theta, dphi, e, P) <= 1.0

    @settings(max_examples=300, deadline=None)
    @given(thetas, elapsed_mid)
    def test_continuous_at_zero(self, theta, e):
        cat = cat_probability(theta, e, P)
        assert pcat_probability(theta, 1e-12, e, P) == pytest.approx(cat, rel=1e-9, abs=1e-300)
        assert pcat_probability(theta, -1e-12, e, P) == pytest.approx(cat, rel=1e-9, abs=1e-300)


class TestMulti:
    def test_examples(self):
        assert multi_interface_probability([(LTE, 0.2), (WIFI, 0.7)]) == (0.7, WIFI)
        assert multi_interface_probability([(LTE, 0.0), (WIFI, 0.0)]) == (0.0, WIFI)
        assert multi_interface_probability([(LTE, 0.5), (WIFI, 0.5)]) == (0.5, WIFI)
        assert multi_interface_probability([(WIFI, 0.5), (LTE, 0.5)]) == (0.5, WIFI)
        assert multi_interface_probability([(LTE, 0.9), (WIFI, 0.5)]) == (0.9, LTE)

    def test_empty(self):
        with pytest.raises(ValueError):
            multi_interface_probability([])

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from([LTE, WIFI]), thetas), min_size=1, max_size=4))
    def test_dominates(self, probs):
        p, iface = multi_interface_probability(probs)
        assert all(p >= pi for _, pi in probs)
        assert (iface, p) in probs


def test_periodic_due():
    assert not periodic_due(14.9, P)
    assert periodic_due(15.0, P)
    assert not periodic_due(0.0, P)


def ctx(iface, phi, dphi=0.0, available=True):
    rng = RSRP_RANGE if iface is LTE else RSSI_RANGE
    return InterfaceContext(MetricSample(iface, phi, 0 if available else None), rng, dphi, available)


class TestDecide:
    def test_forced_at_tmax(self):
        c = DecisionContext([ctx(LTE, -140.0)], 60.0)
        for scheme in (SchemeKind.CAT, SchemeKind.PCAT):
            assert decide(c, scheme, P, 0.999999)[0]

    def test_never_before_tmin(self):
        c = DecisionContext([ctx(LTE, -50.0), ctx(WIFI, -50.0)], 10.0)
        for scheme in (SchemeKind.CAT, SchemeKind.PCAT):
            assert not decide(c, scheme, P, 0.0)[0]

    def test_bernoulli_threshold(self):
        # theta^8 = 0.5 at theta = 0.5^(1/8)
        theta = 0.5 ** (1 / 8)
        phi = RSRP_RANGE.phi_min + theta * (RSRP_RANGE.phi_max - RSRP_RANGE.phi_min)
        c = DecisionContext([ctx(LTE, phi)], 30.0)
        send, iface, p = decide(c, SchemeKind.CAT, P, 0.49)
        assert p == pytest.approx(0.5, abs=1e-12)
        assert send and iface is LTE
        assert not decide(c, SchemeKind.CAT, P, 0.51)[0]

    def test_unavailable_interface_skipped(self):
        c = DecisionContext([ctx(LTE, -100.0), ctx(WIFI, -89.0, available=False)], 61.0)
        send, iface, _ = decide(c, SchemeKind.PCAT, P, 0.5)
        assert send and iface is LTE

    def test_nothing_available_holds(self):
        c = DecisionContext([ctx(WIFI, -89.0, available=False)], 100.0)
        assert decide(c, SchemeKind.CAT, P, 0.0)[0] is False

    def test_tie_prefers_better_channel(self):
        c = DecisionContext([ctx(LTE, -60.0), ctx(WIFI, -85.0)], 60.0)
        assert decide(c, SchemeKind.CAT, P, 0.5)[1] is LTE
        c = DecisionContext([ctx(LTE, -100.0), ctx(WIFI, -60.0)], 60.0)
        assert decide(c, SchemeKind.CAT, P, 0.5)[1] is WIFI

    def test_periodic(self):
        c = DecisionContext([ctx(LTE, -100.0)], 14.9)
        assert decide(c, SchemeKind.PERIODIC, P, 0.0)[0] is False
        c = DecisionContext([ctx(LTE, -100.0)], 15.0)
        assert decide(c, SchemeKind.PERIODIC, P, 0.99)[0] is True

    def test_bad_draw(self):
        with pytest.raises(ValueError):
            decide(DecisionContext([ctx(LTE, -100.0)], 30.0), SchemeKind.CAT, P, 1.0)


class TestParamsAndBuffer:
    def test_invalid_params(self):
        with pytest.raises(ConfigurationError):
            SchemeParams(t_min=60, t_max=10)
        with pytest.raises(ConfigurationError):
            SchemeParams(alpha=0)
        with pytest.raises(ConfigurationError):
            SchemeParams(tau=0)

    def test_flush_empties_and_resets(self):
        buf = TransmitBuffer()
        for k in range(3):
            buf.push(SensorPacket(k, float(k)))
        out = buf.flush(5.0)
        assert [p.id for p in out] == [0, 1, 2]
        assert len(buf) == 0 and buf.last_tx == 5.0

    def test_out_of_order_rejected(self):
        buf = TransmitBuffer()
        buf.push(SensorPacket(0, 5.0))
        with pytest.raises(ValueError):
            buf.push(SensorPacket(1, 4.0))
