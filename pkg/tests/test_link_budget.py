import math

import numpy as np
import pytest

from netsense.link_budget import (
    PEDESTRIAN_RCS_DBSM,
    SPEED_OF_LIGHT_MPS,
    VEHICLE_RCS_DBSM,
    LinkBudgetParams,
    covered,
    db_to_linear,
    guard_interval,
    linear_to_db,
    max_sensing_range,
    range_resolution,
    sensing_snr,
)


def pedestrian() -> LinkBudgetParams:
    return LinkBudgetParams()  # defaults are the pedestrian table values


def vehicle() -> LinkBudgetParams:
    return LinkBudgetParams(rcs_dbsm=VEHICLE_RCS_DBSM)


class TestSensingSnr:
    def test_pedestrian_at_413m_is_10db(self):
        assert sensing_snr(pedestrian(), 413.0).db == pytest.approx(10.0, abs=0.2)

    def test_vehicle_at_1744m_is_10db(self):
        assert sensing_snr(vehicle(), 1744.0).db == pytest.approx(10.0, abs=0.2)

    def test_doubling_range_costs_r4(self):
        p = pedestrian()
        drop = sensing_snr(p, 200.0).db - sensing_snr(p, 400.0).db
        assert drop == pytest.approx(10.0 * math.log10(16.0), abs=1e-9)

    def test_db_linear_consistency(self):
        r = sensing_snr(pedestrian(), 300.0)
        assert r.db == pytest.approx(10.0 * math.log10(r.linear), abs=1e-12)

    def test_nonpositive_range_rejected(self):
        with pytest.raises(ValueError):
            sensing_snr(pedestrian(), 0.0)
        with pytest.raises(ValueError):
            sensing_snr(pedestrian(), -5.0)


class TestMaxSensingRange:
    def test_pedestrian_coverage_413m(self):
        assert max_sensing_range(pedestrian(), 10.0) == pytest.approx(413.0, rel=0.01)

    def test_vehicle_coverage_1744m(self):
        assert max_sensing_range(vehicle(), 10.0) == pytest.approx(1744.0, rel=0.01)

    def test_rcs_times_16_doubles_range(self):
        base = max_sensing_range(pedestrian(), 10.0)
        boosted = LinkBudgetParams(rcs_dbsm=PEDESTRIAN_RCS_DBSM + 10.0 * math.log10(16.0))
        assert max_sensing_range(boosted, 10.0) == pytest.approx(2.0 * base, rel=1e-12)

    def test_round_trip_with_snr(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            params = LinkBudgetParams(
                pt_watts=float(rng.uniform(0.1, 100)),
                gt_dbi=float(rng.uniform(0, 40)),
                rcs_dbsm=float(rng.uniform(-20, 20)),
                bandwidth_hz=float(rng.uniform(1e6, 1e9)),
            )
            gamma = float(rng.uniform(-5, 25))
            r = max_sensing_range(params, gamma)
            assert sensing_snr(params, r).db == pytest.approx(gamma, rel=1e-9, abs=1e-9)

    def test_monotonicity(self):
        p = pedestrian()
        snrs = [sensing_snr(p, r).db for r in (100, 200, 400, 800)]
        assert all(a > b for a, b in zip(snrs, snrs[1:]))

        assert max_sensing_range(LinkBudgetParams(rcs_dbsm=0), 10) > max_sensing_range(
            LinkBudgetParams(rcs_dbsm=-10), 10
        )
        assert max_sensing_range(LinkBudgetParams(pt_watts=20), 10) > max_sensing_range(
            LinkBudgetParams(pt_watts=10), 10
        )
        assert max_sensing_range(LinkBudgetParams(bandwidth_hz=2e8), 10) < max_sensing_range(
            LinkBudgetParams(bandwidth_hz=1e8), 10
        )
        assert max_sensing_range(LinkBudgetParams(noise_factor_db=8), 10) < max_sensing_range(
            LinkBudgetParams(noise_factor_db=5), 10
        )
        assert max_sensing_range(pedestrian(), 13) < max_sensing_range(pedestrian(), 10)


class TestRangeResolution:
    def test_400mhz(self):
        # 0.375 m assumes c = 3e8; the pinned c = 2.998e8 lands within 0.1%.
        assert range_resolution(400e6) == pytest.approx(0.375, rel=1e-3)

    def test_800mhz_gives_0p1875(self):
        assert range_resolution(800e6) == pytest.approx(0.1875, rel=1e-3)

    def test_inverse_proportionality(self):
        assert range_resolution(2 * 123e6) == pytest.approx(range_resolution(123e6) / 2, rel=1e-14)

    def test_nonpositive_bandwidth_rejected(self):
        with pytest.raises(ValueError):
            range_resolution(0.0)


class TestGuardInterval:
    def test_150m_round_trip_is_1us(self):
        assert guard_interval(150.0) == pytest.approx(1.0e-6, rel=1e-3)

    def test_linear_scaling(self):
        assert guard_interval(0.15) == pytest.approx(1.0e-9, rel=1e-3)

    def test_413m(self):
        expected = 2.0 * 413.0 / SPEED_OF_LIGHT_MPS
        assert guard_interval(413.0) == pytest.approx(expected, rel=1e-15)
        assert guard_interval(413.0) == pytest.approx(2.755e-6, rel=1e-3)

    def test_nonpositive_range_rejected(self):
        with pytest.raises(ValueError):
            guard_interval(-1.0)


class TestCovered:
    def test_pedestrian_400m_inside(self):
        assert covered(pedestrian(), 10.0, 400.0)

    def test_pedestrian_500m_outside(self):
        assert not covered(pedestrian(), 10.0, 500.0)

    def test_boundary_inclusive(self):
        r = max_sensing_range(pedestrian(), 10.0)
        assert covered(pedestrian(), 10.0, r)

    def test_consistency_with_max_range(self):
        p = pedestrian()
        r = max_sensing_range(p, 10.0)
        assert covered(p, 10.0, r * 0.999)
        assert not covered(p, 10.0, r * 1.001)


class TestConversions:
    def test_db_round_trip(self):
        rng = np.random.default_rng(0)
        for db in rng.uniform(-100, 100, 200):
            assert linear_to_db(db_to_linear(db)) == pytest.approx(db, rel=1e-12, abs=1e-12)

    def test_params_validate_positive_quantities(self):
        with pytest.raises(ValueError):
            LinkBudgetParams(pt_watts=0.0)
        with pytest.raises(ValueError):
            LinkBudgetParams(carrier_hz=-1.0)
        with pytest.raises(ValueError):
            LinkBudgetParams(bandwidth_hz=0.0)

    def test_wavelength_from_carrier(self):
        p = LinkBudgetParams(carrier_hz=3.5e9)
        assert p.wavelength_m == pytest.approx(SPEED_OF_LIGHT_MPS / 3.5e9, rel=1e-15)
