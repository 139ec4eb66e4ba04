from collections import defaultdict
from dataclasses import replace

import pytest

from cartocloud.channel import DEFAULT_LINKS, Interface
from cartocloud.engine import (
    InterfaceMode,
    SimConfig,
    collect_statistics,
    execute_transmission,
    run,
)
from cartocloud.output import summary_json
from cartocloud.scenario import default_scenario
from cartocloud.scheme import SchemeKind, SensorPacket
from cartocloud.topology import ConfigurationError

WIFI, LTE = Interface.WIFI, Interface.LTE


def packets(n, t0=0.0):
    return [SensorPacket(k, t0 + k) for k in range(n)]


class TestExecuteTransmission:
    def test_all_delivered(self):
        rec, ok, lost = execute_transmission(packets(3), WIFI, DEFAULT_LINKS[WIFI], lambda t: -60.0)
        assert len(ok) == 3 and not lost
        assert rec.succeeded == 3 and rec.dropped == 0 and rec.retries == 0
        assert rec.delivered_bytes == 30_000

    def test_coverage_lost_after_first_chunk(self):
        link = DEFAULT_LINKS[WIFI]
        first = 80_000 / 9e6  # -60 dBm sits halfway between 6 and 12 Mbit/s

        def metric(t):
            return -60.0 if t < first / 2 else -95.0

        rec, ok, lost = execute_transmission(packets(3), WIFI, link, metric, retry_interval=0.01)
        assert len(ok) == 1 and len(lost) == 2
        assert ok[0][1] == pytest.approx(first)
        assert rec.retries == 2 * link.max_retries
        assert rec.attempted == 1 + 2 * (link.max_retries + 1)
        assert rec.completion == pytest.approx(first + 2 * (link.max_retries + 1) * 0.01)

    def test_chunk_airtime(self):
        rec, ok, _ = execute_transmission(packets(1), WIFI, DEFAULT_LINKS[WIFI], lambda t: -70.0, start=5.0)
        assert ok[0][1] - 5.0 == pytest.approx(0.013333, abs=1e-6)
        assert rec.completion == ok[0][1]

    def test_empty(self):
        with pytest.raises(ValueError):
            execute_transmission([], LTE, DEFAULT_LINKS[LTE], lambda t: -80.0)


class TestCollectStatistics:
    def test_null_run(self):
        buffered = [(p, 0) for p in packets(5)]
        st = collect_statistics([], [], [], buffered, [0], 600.0)
        assert st.goodput == 0.0
        assert st.pdr == 0.0
        assert st.mean_age is None and st.ages == []
        assert st.buffered_end == 5

    def test_goodput_division(self):
        pk = packets(60)
        delivered = [(p, p.generated + 1.0, 0, LTE) for p in pk]
        st = collect_statistics([], delivered, [], [], [0], 600.0)
        assert sum(p.size * 8 for p in pk) == 4_800_000
        assert st.goodput == pytest.approx(8000.0)
        assert st.pdr == 1.0

    def test_age(self):
        p = SensorPacket(0, 100.0)
        st = collect_statistics([], [(p, 131.2, 0, LTE)], [], [], [0], 600.0)
        assert st.ages == [pytest.approx(31.2)]

    def test_pdr_counts_drops(self):
        pk = packets(4)
        st = collect_statistics([], [(pk[0], 1.0, 0, LTE)], [(q, 0) for q in pk[1:3]], [(pk[3], 0)], [0], 10.0)
        assert st.pdr == pytest.approx(1 / 3)
        assert st.generated == 4


@pytest.fixture(scope="module")
def small(scenario):
    return SimConfig(scenario, vehicles=60, penetration=0.25, duration=240.0)


class TestRun:
    def test_zero_duration(self, scenario):
        with pytest.raises(ConfigurationError):
            run(SimConfig(scenario, duration=0.0))

    def test_warmup_longer_than_run(self, scenario):
        with pytest.raises(ConfigurationError):
            run(SimConfig(scenario, duration=30.0))

    def test_equipped_count(self, scenario):
        res = run(SimConfig(scenario, vehicles=150, penetration=0.10, duration=61.0))
        assert len(res.equipped) == 15

    def test_deterministic(self, small):
        a, b = run(small), run(small)
        assert summary_json(a) == summary_json(b)
        assert a.stats == b.stats
        c = run(replace(small, seed=2))
        assert c.equipped != a.equipped

    @pytest.mark.parametrize("scheme", list(SchemeKind))
    @pytest.mark.parametrize("mode", list(InterfaceMode))
    def test_conservation(self, small, scheme, mode):
        res = run(replace(small, scheme=scheme, mode=mode))
        st = res.stats
        ticks = int(small.duration / small.decision_tick)
        assert st.generated == len(res.equipped) * ticks
        assert st.generated == st.delivered + st.dropped + st.buffered_end

    @pytest.mark.parametrize("scheme", [SchemeKind.CAT, SchemeKind.PCAT])
    @pytest.mark.parametrize("mode", [InterfaceMode.LTE, InterfaceMode.MULTI])
    def test_gap_invariant(self, small, scheme, mode):
        res = run(replace(small, scheme=scheme, mode=mode))
        p = small.params
        starts = defaultdict(list)
        for rec in res.records:
            starts[rec.vehicle].append(rec.start)
        assert starts
        for ts in starts.values():
            prev = 0.0
            for t in ts:
                assert p.t_min < t - prev <= p.t_max + small.decision_tick + 1e-9
                prev = t
        # age bound: buffering never exceeds t_max plus a decision tick and the airtime
        assert max(res.stats.ages) <= p.t_max + small.decision_tick + 1.0

    def test_no_rsus(self):
        sc = default_scenario(rsus=0)
        with pytest.raises(ConfigurationError):
            run(SimConfig(sc, vehicles=20, duration=90.0, mode=InterfaceMode.WIFI))
        multi = run(SimConfig(sc, vehicles=20, penetration=0.5, duration=90.0, mode=InterfaceMode.MULTI))
        assert multi.records and all(r.interface is LTE for r in multi.records)

    def test_no_sites_for_mode(self):
        with pytest.raises(ConfigurationError):
            run(SimConfig(default_scenario(enodebs=0), vehicles=20, duration=90.0, mode=InterfaceMode.LTE))

    def test_tick_refinement(self, scenario):
        base = SimConfig(scenario, vehicles=150, penetration=0.10, duration=300.0, scheme=SchemeKind.CAT,
                         mode=InterfaceMode.LTE)
        coarse = run(base).stats
        fine = run(replace(base, mobility_tick=0.05)).stats
        assert abs(fine.goodput - coarse.goodput) / coarse.goodput < 0.05

    def test_prediction_stats(self, small):
        res = run(replace(small, prediction_stats=True))
        pos = res.stats.position_error
        assert set(pos) == {"extrapolation", "trajectory_vel", "trajectory_acc"}
        assert set(pos["trajectory_acc"]) == {"10", "30", "60"}
        assert pos["trajectory_acc"]["10"]["n"] > 0
        assert set(res.stats.metric_error) == {"LTE", "WIFI"}
