import json
import math

import numpy as np
import pandas as pd
import pytest

from turnmix.errors import InvalidArgumentError
from turnmix.posterior import (
    angle_histogram,
    export_artifacts,
    join_combine,
    player_effect_draws,
    player_ratings,
    roster_from_table,
    summarize,
)
from turnmix.sampler import PosteriorDraws


def make_draws(values, names):
    arr = np.asarray(values, dtype=float)
    return PosteriorDraws(arr.reshape(4, -1, len(names)), list(names))


def player_draws(means, positions, n=400, seed=0, log_sigma=(0.0, 0.0, 0.0)):
    """Draws whose centred player effects have the requested means."""
    rng = np.random.default_rng(seed)
    J = len(means)
    names = [f"u_tilde[{j}]" for j in range(J)] + ["log_sigma[RB]", "log_sigma[TE]", "log_sigma[WR]"]
    sig = np.exp(np.asarray(log_sigma))[np.asarray(positions)]
    ut = (np.asarray(means) + 0.05 * rng.standard_normal((4 * n, J))) / sig
    ls = np.tile(log_sigma, (4 * n, 1))
    return PosteriorDraws(np.hstack([ut, ls]).reshape(4, n, J + 3), names)


def roster(positions, plays, ids=None):
    J = len(positions)
    return pd.DataFrame({"player_index": range(J), "player_id": ids or [f"p{j}" for j in range(J)],
                         "position": positions, "plays": plays})


def test_constant_draws():
    row = summarize(make_draws(np.full(8000, 0.7), ["a"]))[0]
    assert (row.mean, row.sd, row.lower, row.upper) == (pytest.approx(0.7), 0.0, pytest.approx(0.7), pytest.approx(0.7))


def test_quantiles_of_uniform_grid():
    values = np.arange(1, 8001) / 8000
    row = summarize(make_draws(values, ["a"]))[0]
    # linear rule: position (N - 1) p between sorted values
    h = 7999 * 0.025
    lo = values[int(h)] + (h - int(h)) * (values[int(h) + 1] - values[int(h)])
    assert row.lower == pytest.approx(lo, abs=1e-15)
    assert row.lower == pytest.approx(0.025, abs=2e-4)
    assert row.lower <= row.upper


def test_summary_order_invariance():
    rng = np.random.default_rng(1)
    d = make_draws(rng.standard_normal(8000), ["a"])
    shuffled = PosteriorDraws(d.draws[::-1, rng.permutation(2000)], ["a"])
    a, b = summarize(d)[0], summarize(shuffled)[0]
    assert a.mean == pytest.approx(b.mean, rel=1e-12) and a.lower == b.lower and a.upper == b.upper


def test_unknown_name():
    with pytest.raises(KeyError):
        summarize(make_draws(np.zeros(8), ["a"]), ["b"])


def test_centred_effect_summaries():
    d = player_draws([0.5, -0.2], [0, 2], log_sigma=(np.log(0.5), 0.0, np.log(2.0)))
    rows = summarize(d, ["u[0]", "u[1]", "sigma[WR]"], player_position=np.array([0, 2]))
    assert rows[0].mean == pytest.approx(0.5, abs=0.01)
    assert rows[1].mean == pytest.approx(-0.2, abs=0.01)
    assert rows[2].mean == pytest.approx(2.0)
    eff = player_effect_draws(d, np.array([0, 2]))
    assert eff.shape == (1600, 2)


def test_ratings_order_and_ranks():
    d = player_draws([0.2, -0.3], [0, 0])
    ratings = player_ratings(d, roster(["RB", "RB"], [30, 30]))
    assert [(r.player_id, r.rank) for r in ratings] == [("p1", 1), ("p0", 2)]
    assert all(r.lower <= r.upper for r in ratings)


def test_floor_excludes_player():
    d = player_draws([0.1, 0.2, 0.3], [1, 1, 1])
    ratings = player_ratings(d, roster(["TE", "TE", "TE"], [9, 10, 40]))
    assert [r.player_id for r in ratings] == ["p1", "p2"]
    assert sorted(r.rank for r in ratings) == [1, 2]


def test_empty_after_floors_warns(caplog):
    d = player_draws([0.1], [2])
    assert player_ratings(d, roster(["WR"], [1])) == []
    assert "floors" in caplog.text


def test_rank_invariant_under_monotone_transform():
    means = np.random.default_rng(2).normal(0, 0.3, 8)
    a = player_ratings(player_draws(means, [0] * 8), roster(["RB"] * 8, [50] * 8))
    b = player_ratings(player_draws(3 * means + 1, [0] * 8), roster(["RB"] * 8, [50] * 8))
    assert [r.player_id for r in a] == [r.player_id for r in b]


def test_histogram_example():
    edges, counts = angle_histogram([0.0, 0.0, math.pi / 2], bins=4)
    np.testing.assert_allclose(edges, [-math.pi, -math.pi / 2, 0, math.pi / 2, math.pi])
    assert counts.tolist() == [0, 0, 2, 1]
    _, counts = angle_histogram([math.pi], bins=4)
    assert counts.tolist() == [0, 0, 0, 1]


def test_roster_from_table_counts_plays():
    t = pd.DataFrame({"player_index": [0, 0, 0, 1], "player_id": ["a", "a", "a", "b"],
                      "position": ["RB", "RB", "RB", "WR"], "game_id": [1, 1, 1, 1], "play_id": [5, 5, 6, 5]})
    r = roster_from_table(t)
    assert r["plays"].tolist() == [2, 1]


def test_export_and_combine(tmp_path):
    J = 200
    rng = np.random.default_rng(3)
    d = player_draws(rng.normal(0, 0.3, J), [k % 3 for k in range(J)], n=50, seed=4)
    ros = roster([["RB", "TE", "WR"][k % 3] for k in range(J)], [100] * J)
    ratings = player_ratings(d, ros)
    combine = pd.DataFrame({"player_id": [f"p{j}" for j in range(J - 5)],
                            "forty_time_seconds": rng.normal(4.5, 0.1, J - 5)})
    rows = summarize(make_draws(rng.standard_normal(8000), ["psi[speed]"]))
    written = export_artifacts(tmp_path, rows, ratings, angles=rng.uniform(-3, 3, 500), combine=combine)
    report = json.loads(written["join_report"].read_text())
    assert report["matched"] == J - 5 and len(report["unmatched_player_ids"]) == 5
    assert abs(report["pearson"]["overall"]) < 0.1
    profile = pd.read_csv(written["speed_turn_profile"], keep_default_na=False)
    assert (profile["forty_time_seconds"] == "NA").sum() == 5
    hist = pd.read_csv(written["histogram"])
    assert len(hist) == 64 and hist["count"].sum() == 500
    assert pd.read_csv(written["fixed_effects"])["parameter"].tolist() == ["psi[speed]"]


def test_empty_ratings_header_only(tmp_path):
    written = export_artifacts(tmp_path, [], [])
    assert written["ratings"].read_text().strip() == "position,rank,player_id,name,plays,mean,q2.5,q97.5"


def test_combine_schema():
    with pytest.raises(InvalidArgumentError):
        join_combine([], pd.DataFrame({"player_id": []}))
