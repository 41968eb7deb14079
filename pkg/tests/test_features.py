import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from turnmix.errors import AlignmentError, InvalidArgumentError, MissingDefenderError, SchemaError
from turnmix.features import (
    TABLE_COLUMNS,
    PlayerState,
    build_all,
    build_model_frames,
    dataset_to_table,
    frames_to_table,
    nearest_defender_features,
    player_table,
    read_table,
    relative_count_features,
    table_to_dataset,
    vertical_from_center,
    write_table,
)
from turnmix.ingest import IngestReport, extract_carrier_sequences, load_dataset, standardize_play_direction
from turnmix.simulate import simulate_dataset

from . import fixtures


@pytest.fixture(scope="module")
def run_sequence(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    paths = fixtures.write_fixture(d)
    ds = standardize_play_direction(load_dataset(paths["tracking"], paths["plays"], paths["players"],
                                                 paths["player_play"]))
    seqs = extract_carrier_sequences(ds)
    return [s for s in seqs if s.play.play_id == fixtures.RUN_PLAY][0]


def test_head_on_defender():
    carrier = PlayerState(1, 50.0, 26.65)
    defender = PlayerState(2, 55.0, 26.65, s=4.0, dir=math.pi)
    out = nearest_defender_features(carrier, [defender])
    assert out == pytest.approx((4.0, 0.0, 5.0, 0.0, 5.0, 65.0, 0.0), abs=1e-12)


def test_nearest_is_selected():
    carrier = PlayerState(1, 50.0, 20.0)
    near = PlayerState(5, 53.0, 20.0, s=1.0)
    far = PlayerState(3, 57.0, 20.0, s=9.0)
    assert nearest_defender_features(carrier, [far, near])[0] == 1.0


def test_three_four_five():
    out = nearest_defender_features(PlayerState(1, 98.32, 23.00), [PlayerState(2, 100.32, 21.50)])
    assert out[2] == pytest.approx(2.0) and out[3] == pytest.approx(1.5) and out[4] == pytest.approx(2.5)


def test_tie_goes_to_lowest_id():
    carrier = PlayerState(1, 50.0, 20.0)
    a = PlayerState(9, 52.0, 20.0, s=1.0)
    b = PlayerState(4, 48.0, 20.0, s=2.0)
    assert nearest_defender_features(carrier, [a, b])[0] == 2.0


def test_no_defenders():
    with pytest.raises(MissingDefenderError):
        nearest_defender_features(PlayerState(1, 0, 0), [])


def test_vertical_sign():
    assert vertical_from_center(40.0) > 0 > vertical_from_center(10.0)


def _players(rng, n, base=1000):
    return [PlayerState(base + k, rng.uniform(0, 120), rng.uniform(0, 53.3)) for k in range(n)]


def test_all_defenders_in_front():
    carrier = PlayerState(1, 10.0, 20.0)
    defenders = [PlayerState(100 + k, 20.0 + k, 5.0 + k) for k in range(11)]
    teammates = [PlayerState(200 + k, 5.0, 30.0) for k in range(10)]
    assert relative_count_features(carrier, teammates, defenders) == (11, 0, 0, 10)


def test_split_counts():
    carrier = PlayerState(1, 60.0, 26.0)
    xs = [61, 62, 63, 64, 65, 66, 50, 51, 52, 53, 54]
    ys = [30, 31, 32, 33, 10, 11, 12, 13, 14, 15, 16]
    defenders = [PlayerState(100 + k, x, y) for k, (x, y) in enumerate(zip(xs, ys))]
    teammates = [PlayerState(200 + k, 40.0, 20.0) for k in range(10)]
    assert relative_count_features(carrier, teammates, defenders)[:2] == (6, 4)


@pytest.mark.parametrize("seed", range(10))
def test_counts_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    carrier = PlayerState(1, rng.uniform(0, 120), rng.uniform(0, 53.3))
    defenders, teammates = _players(rng, 11, 100), _players(rng, 10, 200)
    got = relative_count_features(carrier, teammates, defenders)
    want = [0, 0, 0, 0]
    for d in defenders:
        want[0] += d.x > carrier.x
        want[1] += d.y > carrier.y
    for t in teammates:
        want[2] += t.x > carrier.x
        want[3] += t.y > carrier.y
    assert got == tuple(want)


def test_alignment_error():
    rng = np.random.default_rng(0)
    with pytest.raises(AlignmentError):
        relative_count_features(PlayerState(1, 50, 20), _players(rng, 10), _players(rng, 10))


def test_rows_from_table_play(run_sequence):
    frames = build_model_frames(run_sequence)
    assert len(frames) == 29 - 3
    first = frames[0]
    assert first.frame_id == 18
    dis = run_sequence.carrier.set_index("frameId")["dis"]
    assert first.z[2] == pytest.approx(dis.loc[16] + dis.loc[17] + dis.loc[18], abs=1e-12)
    assert first.phi_prev == frames[0].x[0] and frames[1].phi_prev == frames[0].phi
    assert first.x[3] == pytest.approx(100.0 - run_sequence.carrier.set_index("frameId")["x"].loc[18])
    cum = [f.z[2] for f in frames]
    assert np.all(np.diff(cum) >= 0)
    for f in frames:
        assert np.all(np.isfinite(f.x)) and np.all(np.isfinite(f.z))
        assert f.z[3:].tolist() == [1.0, 0.0, 0.0]
        assert 0 <= f.x[4] <= 11 and 0 <= f.x[6] <= 10 and f.x[12] > 0


def test_straight_line_minimal_sequence(run_sequence):
    frames = run_sequence.frames.copy()
    keep = frames["frameId"].between(16, 19)
    frames = frames[keep].copy()
    car = frames["nflId"] == fixtures.CARRIER
    frames.loc[car, "x"] = 90.0 + frames.loc[car, "frameId"] - 16
    frames.loc[car, "y"] = 20.0
    seq = replace(run_sequence, frames=frames.reset_index(drop=True), end_frame=19)
    rows = build_model_frames(seq)
    assert len(rows) == 1
    assert rows[0].phi == 0.0 and rows[0].phi_prev == 0.0


def test_mirror_symmetry(run_sequence):
    frames = run_sequence.frames.copy()
    frames["y"] = 53.3 - frames["y"]
    frames["dir"] = -frames["dir"]
    frames["o"] = -frames["o"]
    mirrored = replace(run_sequence, frames=frames)
    a, b = build_model_frames(run_sequence), build_model_frames(mirrored)
    assert len(a) == len(b)
    for fa, fb in zip(a, b):
        assert fb.phi == pytest.approx(-fa.phi, abs=1e-9)
        assert fb.x[2] == pytest.approx(-fa.x[2], abs=1e-9)
        assert fb.x[5] == 11 - fa.x[5]
        assert fb.x[7] == 10 - fa.x[7]
        assert fb.x[9] == pytest.approx(-fa.x[9], abs=1e-9)
        np.testing.assert_allclose(fb.z, fa.z)


def test_missing_line_of_scrimmage(run_sequence):
    meta = replace(run_sequence.play, absolute_yardline=float("nan"))
    with pytest.raises(InvalidArgumentError):
        build_model_frames(run_sequence, meta)


def test_build_all_reports_failures(run_sequence):
    frames = run_sequence.frames
    short_team = frames[frames["nflId"] != 2000].reset_index(drop=True)
    bad = replace(run_sequence, frames=short_team)
    report = IngestReport()
    rows = build_all([run_sequence, bad], report)
    assert len(rows) == 26 and report.excluded["feature_error"] == 1
    with pytest.raises(AlignmentError):
        build_all([bad])


def test_table_round_trip(tmp_path, run_sequence):
    table = frames_to_table(build_model_frames(run_sequence))
    assert list(table.columns) == list(TABLE_COLUMNS)
    write_table(table, tmp_path / "mf.csv")
    back = read_table(tmp_path / "mf.csv")
    pd.testing.assert_frame_equal(back, table, check_dtype=False)
    data = table_to_dataset(back)
    assert data.J == 1 and data.n_rows == 26


def test_dataset_table_round_trip():
    sim = simulate_dataset(players_per_position=(2, 1, 2), rows_per_player=20, seed=1)
    data = table_to_dataset(dataset_to_table(sim.data))
    np.testing.assert_array_equal(data.x, sim.data.x)
    np.testing.assert_array_equal(data.player_position, sim.data.player_position)
    assert data.player_ids == list(sim.data.player_ids)


def test_player_table_order():
    t = player_table([7, 3, 5, 1], ["WR", "RB", "TE", "RB"])
    assert t["player_id"].tolist() == [1, 3, 5, 7]
    assert t["player_index"].tolist() == [0, 1, 2, 3]
    with pytest.raises(InvalidArgumentError):
        player_table([1], ["QB"])


def test_table_schema_errors():
    with pytest.raises(SchemaError):
        table_to_dataset(pd.DataFrame({"phi": [0.0]}))
