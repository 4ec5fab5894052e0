import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pilotsched import (LinkParams, LogisticBlerCurve, McsEntry, McsTable,
                        QuadratureConfig, RewardCurve, TabulatedBlerCurve,
                        autocorrelation, bler, build_reward_curve,
                        default_mcs_table, expected_goodput, load_bler_table,
                        load_mcs_rates, max_goodput)
from pilotsched.validation import mc_expected_goodput


def single_entry_table(rate: float, curve, e_max: float = 0.1) -> McsTable:
    return McsTable(entries=[McsEntry(index=1, rate=rate, bler_curve=curve)],
                    e_max=e_max)


class TestBler:
    def test_zero_sinr_is_one(self, default_table):
        for entry in default_table.entries:
            assert bler(0.0, entry) >= 1.0 - 1e-6

    def test_midpoint_is_half(self):
        curve = LogisticBlerCurve(1.5, midpoint_db=3.0)
        entry = McsEntry(index=1, rate=1.0, bler_curve=curve)
        assert bler(10 ** (3.0 / 10.0), entry) == pytest.approx(0.5, abs=1e-12)

    def test_monotone_nonincreasing_grid(self, default_table):
        grid = np.geomspace(1e-6, 1e6, 1000)
        for entry in default_table.entries:
            vals = [bler(float(x), entry) for x in grid]
            assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_limits(self, default_table):
        for entry in default_table.entries:
            assert bler(1e12, entry) <= 1e-6
            assert bler(1e-12, entry) >= 1.0 - 1e-6

    def test_negative_sinr_rejected(self, default_table):
        with pytest.raises(ValueError):
            bler(-0.5, default_table.entries[0])

    @given(st.floats(min_value=1e-9, max_value=1e9))
    @settings(max_examples=60, deadline=None)
    def test_in_unit_interval(self, eta):
        entry = default_mcs_table().entries[7]
        assert 0.0 <= bler(eta, entry) <= 1.0


class TestMaxGoodput:
    def test_zero_sinr_infeasible(self, default_table):
        goodput, chosen = max_goodput(0.0, default_table)
        assert goodput == 0.0 and chosen is None

    def test_single_entry_hand_value(self):
        # rate 2, bler 0.05 at the probe point, e_max 0.1 -> 2 * 0.95 = 1.9
        curve = LogisticBlerCurve(1.5, midpoint_db=0.0)
        table = single_entry_table(2.0, curve)
        # invert: bler = 0.05 at z where 1/(1+e^z) = 0.05 -> z = ln(19)
        eta_db = math.log(19.0) / 1.5
        eta = 10 ** (eta_db / 10.0)
        goodput, chosen = max_goodput(eta, table)
        assert chosen is table.entries[0]
        assert goodput == pytest.approx(1.9, rel=1e-9)

    def test_constraint_excludes_high_rate(self):
        # (R=1, bler 0) and (R=4, bler 0.5): the 4*0.5=2 entry is infeasible
        table = McsTable(entries=[
            McsEntry(index=1, rate=1.0, bler_curve=lambda eta: 0.0),
            McsEntry(index=2, rate=4.0, bler_curve=lambda eta: 0.5),
        ], e_max=0.1)
        goodput, chosen = max_goodput(5.0, table)
        assert goodput == 1.0
        assert chosen.index == 1

    def test_nondecreasing_in_eta(self, default_table):
        grid = np.geomspace(1e-4, 1e4, 400)
        vals = [max_goodput(float(x), default_table)[0] for x in grid]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_bounded_by_max_rate(self, default_table):
        for x in np.geomspace(1e-3, 1e9, 100):
            assert max_goodput(float(x), default_table)[0] <= default_table.max_rate


class TestMcsTableValidation:
    def test_non_increasing_rates_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            McsTable(entries=[
                McsEntry(index=1, rate=2.0, bler_curve=lambda e: 0.5),
                McsEntry(index=2, rate=1.0, bler_curve=lambda e: 0.5),
            ])

    def test_bad_e_max_rejected(self):
        entry = McsEntry(index=1, rate=1.0, bler_curve=lambda e: 0.5)
        with pytest.raises(ValueError):
            McsTable(entries=[entry], e_max=0.0)
        with pytest.raises(ValueError):
            McsTable(entries=[entry], e_max=1.0)

    def test_default_table_shape(self, default_table):
        assert len(default_table.entries) == 15
        assert default_table.e_max == 0.1
        assert [e.index for e in default_table.entries] == list(range(1, 16))


class TestExpectedGoodput:
    def test_decorrelated_age_zero(self):
        # first Bessel zero at fd*Ts*age ~ 0.3828: engineered rho(age) ~ 0
        p = LinkParams(1.0, 1.0, 0.01, doppler_hz=2.404825557695773 / (2 * math.pi * 7) * 1000,
                       sample_period=1e-3)
        assert autocorrelation(7, p) == pytest.approx(0.0, abs=1e-12)
        assert expected_goodput(7, p, default_mcs_table()) == 0.0

    def test_always_feasible_single_entry(self, reference_params):
        # bler 0 for eta > 0: r(age) = R for any age with rho != 0
        table = single_entry_table(3.0, lambda eta: np.zeros_like(np.asarray(eta, dtype=float)))
        val = expected_goodput(1, reference_params, table)
        assert val == pytest.approx(3.0, rel=1e-12)

    def test_dip_near_first_bessel_zero(self, reference_params, default_table):
        r = [expected_goodput(d, reference_params, default_table) for d in range(1, 21)]
        argmin = int(np.argmin(r)) + 1
        assert argmin in (6, 7, 8)
        assert r[argmin + 3 - 1] > r[argmin - 1]

    def test_quadrature_matches_monte_carlo(self, default_table):
        # module invariant: rel <= 1e-3 at 1e6 samples for 10 random points
        rng = np.random.default_rng(59)
        checked = 0
        while checked < 10:
            snr_db = rng.uniform(0.0, 20.0)
            fd_ts = rng.uniform(0.02, 0.08)
            age = int(rng.integers(1, 6))
            p = LinkParams(1.0, 1.0, 10 ** (-snr_db / 10.0),
                           doppler_hz=fd_ts * 1000.0, sample_period=1e-3)
            quad_val = expected_goodput(age, p, default_table)
            if quad_val < 0.05 * default_table.max_rate:
                continue
            mc_val, _ = mc_expected_goodput(age, p, default_table, 1_000_000,
                                            seed=int(rng.integers(0, 2 ** 63)))
            assert abs(quad_val - mc_val) / mc_val <= 1e-3
            checked += 1

    def test_node_count_floor(self):
        with pytest.raises(ValueError):
            QuadratureConfig(nodes=4)

    def test_node_doubling_converged(self, reference_params, default_table):
        # rate crossings inside a panel cap convergence around 1e-11; the
        # contract is 1e-4, so 1e-9 leaves a wide regression margin
        for age in (1, 3, 5, 10):
            a = expected_goodput(age, reference_params, default_table, QuadratureConfig(nodes=64))
            b = expected_goodput(age, reference_params, default_table,
                                 QuadratureConfig(nodes=128, max_panel=2.0))
            assert a == pytest.approx(b, rel=1e-9, abs=1e-300)

    def test_age_depends_only_on_rho_magnitude(self, default_table):
        # rho(10) < 0 at fd*Ts = 0.05; flipping the sign of rho leaves r unchanged
        # (structurally: the SINR gain uses rho^2), so equal |rho| gives equal r.
        p0 = LinkParams(1.0, 1.0, 0.1, doppler_hz=0.0)
        vals = [expected_goodput(d, p0, default_table) for d in (1, 5, 20)]
        assert vals[0] == vals[1] == vals[2]


class TestBuildRewardCurve:
    def test_single_age(self, reference_params, default_table):
        c = build_reward_curve(reference_params, default_table, 1)
        assert len(c) == 1
        assert c.value(1) == expected_goodput(1, reference_params, default_table)

    def test_bit_identical_recomputation(self, reference_params, default_table):
        a = build_reward_curve(reference_params, default_table, 30)
        b = build_reward_curve(reference_params, default_table, 30)
        assert np.array_equal(a.values, b.values)
        assert a.fingerprint == b.fingerprint

    def test_argmax_at_age_one_before_first_zero(self, reference_params, default_table):
        c = build_reward_curve(reference_params, default_table, 6)
        assert int(np.argmax(c.values)) == 0

    def test_overflow_bound_rejected(self, reference_params, default_table):
        with pytest.raises(ValueError):
            build_reward_curve(reference_params, default_table, 10_000_001)

    def test_values_within_range(self, reference_params, default_table):
        c = build_reward_curve(reference_params, default_table, 40)
        assert np.all(c.values >= 0)
        assert np.all(c.values <= default_table.max_rate)


class TestLoadBlerTable:
    def _write(self, tmp_path, text, name="bler.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_interpolation_in_db(self, tmp_path):
        path = self._write(tmp_path, "cqi,snr_db,bler\n1,0.0,0.9\n1,10.0,0.01\n")
        table = load_bler_table(path)
        entry = next(e for e in table.entries if e.index == 1)
        assert bler(10 ** 0.5, entry) == pytest.approx(0.455, abs=1e-12)

    def test_clamped_extrapolation(self, tmp_path):
        path = self._write(tmp_path, "cqi,snr_db,bler\n1,0.0,0.9\n1,10.0,0.01\n")
        entry = load_bler_table(path).entries[0]
        assert bler(10 ** (-1.0), entry) == 0.9   # -10 dB, below the grid
        assert bler(10 ** 3.0, entry) == 0.01     # +30 dB, above the grid

    def test_empty_file_rejected(self, tmp_path):
        path = self._write(tmp_path, "")
        with pytest.raises(ValueError, match="empty"):
            load_bler_table(path)

    def test_header_only_rejected(self, tmp_path):
        path = self._write(tmp_path, "cqi,snr_db,bler\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_bler_table(path)

    def test_bler_outside_unit_interval_rejected(self, tmp_path):
        path = self._write(tmp_path, "cqi,snr_db,bler\n1,0.0,1.5\n")
        with pytest.raises(ValueError, match="row 2"):
            load_bler_table(path)

    def test_unsorted_grid_rejected(self, tmp_path):
        path = self._write(tmp_path, "cqi,snr_db,bler\n1,10.0,0.1\n1,0.0,0.9\n")
        with pytest.raises(ValueError, match="sorted"):
            load_bler_table(path)

    def test_non_monotone_curve_names_cqi(self, tmp_path):
        path = self._write(tmp_path,
                           "cqi,snr_db,bler\n3,0.0,0.5\n3,5.0,0.8\n")
        with pytest.raises(ValueError, match="cqi 3"):
            load_bler_table(path)

    def test_non_monotone_rates_rejected(self, tmp_path):
        bler_csv = self._write(tmp_path, "cqi,snr_db,bler\n1,0.0,0.9\n1,10.0,0.0\n"
                                         "2,0.0,0.9\n2,10.0,0.0\n")
        rates = self._write(tmp_path,
                            '{"e_max": 0.1, "rates": {"1": 2.0, "2": 1.0}}',
                            name="rates.json")
        with pytest.raises(ValueError, match="non-monotone rate ordering"):
            load_bler_table(bler_csv, rate_config=rates)

    def test_rate_config_round_trip(self, tmp_path):
        rates = self._write(tmp_path,
                            '{"e_max": 0.05, "rates": {"1": 0.5, "2": 1.0}}',
                            name="rates.json")
        loaded, e_max = load_mcs_rates(rates)
        assert loaded == {1: 0.5, 2: 1.0}
        assert e_max == 0.05

    def test_loaded_table_usable_for_goodput(self, tmp_path, reference_params):
        rows = ["cqi,snr_db,bler"]
        for cqi, mid in ((1, -5.0), (2, 5.0)):
            for snr in np.linspace(-20, 30, 26):
                val = 1.0 / (1.0 + math.exp(1.5 * (snr - mid)))
                rows.append(f"{cqi},{snr},{val}")
        path = self._write(tmp_path, "\n".join(rows) + "\n")
        rates = self._write(tmp_path, '{"e_max": 0.1, "rates": {"1": 1.0, "2": 2.0}}',
                            name="rates.json")
        table = load_bler_table(path, rate_config=rates)
        val = expected_goodput(1, reference_params, table)
        assert 0.0 < val <= 2.0
