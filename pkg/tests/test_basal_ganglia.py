import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from motorhrl.basal_ganglia import (
    CSV_COLUMNS,
    PRESETS,
    ActivityConfig,
    activity,
    activity_table,
    simulate_presets,
    write_simulation_csv,
)
from motorhrl.envs import Locomotor, MotorRewardWeights
from motorhrl.low_level import LowLevelAgent


def test_preset_factors():
    assert PRESETS == {"severe_hd": 10.0, "mild_hd": 3.0, "normal": 1.0, "mild_pd": 0.2, "severe_pd": 0.0}


@pytest.mark.parametrize("z,b,expected", [(0, 1.0, 0.0), (9, 1.0, 1.0), (3, 3.0, 1.0), (2, 0.2, 0.4 / 9)])
def test_activity_values(z, b, expected):
    assert activity(ActivityConfig(b_glu=b), z) == pytest.approx(expected, abs=1e-15)


def test_severe_pd_is_zero_and_severe_hd_is_one():
    zs = np.arange(10)
    assert np.all(activity(ActivityConfig.from_preset("severe_pd"), zs) == 0)
    assert np.all(activity(ActivityConfig.from_preset("severe_hd"), zs) == 1)


def test_bad_inputs():
    with pytest.raises(ValueError):
        ActivityConfig.from_preset("mild")
    with pytest.raises(ValueError):
        ActivityConfig(b_glu=-1)
    with pytest.raises(IndexError):
        activity(ActivityConfig(), 10)


@given(st.floats(0, 20), st.floats(0, 20), st.integers(0, 9), st.integers(0, 9))
def test_monotone_and_bounded(b1, b2, z1, z2):
    lo_b, hi_b = sorted((b1, b2))
    lo_z, hi_z = sorted((z1, z2))
    h = lambda b, z: activity(ActivityConfig(b_glu=b), z)
    assert 0.0 <= h(lo_b, lo_z) <= 1.0
    assert h(lo_b, lo_z) <= h(hi_b, lo_z) + 1e-15
    assert h(lo_b, lo_z) <= h(lo_b, hi_z) + 1e-15
    if hi_b * hi_z >= 9:
        assert h(hi_b, hi_z) == 1.0


def test_normal_preset_has_many_levels():
    assert len(set(activity_table()["normal"].tolist())) >= 3


def test_simulation_rows_and_csv(tmp_path):
    rng = np.random.default_rng(0)
    agent = LowLevelAgent(6, 3, rng, hidden=(16, 16))
    env = Locomotor(n=4, horizon=12, seed=0)
    res = simulate_presets(agent, env, MotorRewardWeights(), 10, rng)
    assert np.all(res["severe_pd"]["weighted_r_e"] == 0)
    # one shared reward stream for every preset
    np.testing.assert_array_equal(res["normal"]["r_e"], res["mild_pd"]["r_e"])
    rows = write_simulation_csv({"severe_pd": res["severe_pd"]}, tmp_path / "bg.csv")
    assert rows == 10 * 12
    with open(tmp_path / "bg.csv") as fh:
        data = list(csv.reader(fh))
    assert tuple(data[0]) == CSV_COLUMNS
    assert len(data) == rows + 1
    assert {float(r[5]) for r in data[1:]} == {0.0}
