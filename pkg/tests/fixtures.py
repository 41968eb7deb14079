"""Synthetic tracking tables in the Big Data Bowl layout.

The carrier's path passes exactly through the frames printed in the
tracking-data example table (frames 6, 7, 16, 25, 43, 44); frames in between
are linear interpolations.
"""

import math

import numpy as np
import pandas as pd

GAME = 2022110600
RUN_PLAY = 56
PASS_PLAY = 77
LEFT_PLAY = 91
CARRIER = 1001
QB = 1002

# frameId, x, y, s, a, dis, o, dir, event
TABLE1 = [
    (6, 95.45, 23.63, 0.25, 2.05, 0.02, 76.69, 127.17, "ball_snap"),
    (7, 95.49, 23.61, 0.66, 3.50, 0.05, 77.79, 117.14, ""),
    (16, 98.32, 23.00, 5.15, 2.13, 0.50, 89.12, 100.99, "handoff"),
    (25, 102.81, 21.10, 5.33, 1.75, 0.54, 77.30, 123.03, "first_contact"),
    (43, 107.49, 16.59, 2.92, 1.73, 0.29, 269.27, 137.37, ""),
    (44, 107.65, 16.42, 2.45, 2.81, 0.24, 266.75, 136.04, "tackle"),
]

TRACKING_COLUMNS = ["gameId", "playId", "nflId", "displayName", "frameId", "club", "playDirection",
                    "x", "y", "s", "a", "dis", "o", "dir", "event"]


def carrier_track():
    """Rows for frames 6..44 matching the example table at its printed frames."""
    known = {r[0]: r for r in TABLE1}
    frames = np.arange(6, 45)
    cols = np.array([r[1:8] for r in TABLE1], dtype=float)
    kf = np.array([r[0] for r in TABLE1], dtype=float)
    interp = np.column_stack([np.interp(frames, kf, cols[:, k]) for k in range(cols.shape[1])])
    # a small sideways wobble keeps interpolated segments from being collinear
    wobble = 0.03 * np.sin(frames)
    rows = []
    for i, f in enumerate(frames):
        if f in known:
            r = known[f]
            rows.append((int(f), *r[1:8], r[8]))
        else:
            x, y, s, a, dis, o, d = interp[i]
            rows.append((int(f), x, y + wobble[i], s, a, dis, o, d, ""))
    return rows


def _others(rng, frames, carrier_xy, events, n_team=10, n_def=11):
    rows = []
    for k in range(n_team + n_def):
        team = k < n_team
        base = np.asarray(carrier_xy) + rng.uniform(-8, 8, 2)
        for i, f in enumerate(frames):
            x = float(np.clip(base[0] + 0.3 * i * (1 if team else -1) * 0.1, 1, 119))
            y = float(np.clip(base[1] + rng.normal(0, 0.05), 1, 52))
            rows.append(dict(nflId=2000 + k if team else 3000 + k, club="CIN" if team else "CAR",
                             frameId=f, x=x, y=y, s=rng.uniform(0, 6), a=rng.uniform(0, 3), dis=0.1,
                             o=rng.uniform(0, 360), dir=rng.uniform(0, 360), event=events.get(f, "")))
    return rows


def play_tracking(play_id, carrier_rows, direction="right", carrier_id=CARRIER, seed=0, ball=True):
    rng = np.random.default_rng(seed)
    events = {r[0]: r[8] for r in carrier_rows if r[8]}
    frames = [r[0] for r in carrier_rows]
    rows = [dict(nflId=carrier_id, club="CIN", frameId=r[0], x=r[1], y=r[2], s=r[3], a=r[4], dis=r[5],
                 o=r[6], dir=r[7], event=events.get(r[0], "")) for r in carrier_rows]
    rows += _others(rng, frames, (carrier_rows[0][1], carrier_rows[0][2]), events)
    if ball:
        rows += [dict(nflId="", club="football", frameId=r[0], x=r[1], y=r[2], s=r[3], a=0, dis=r[5],
                      o="", dir="", event=events.get(r[0], "")) for r in carrier_rows]
    df = pd.DataFrame(rows)
    df["gameId"] = GAME
    df["playId"] = play_id
    df["displayName"] = "player"
    df["playDirection"] = direction
    return df[TRACKING_COLUMNS]


def mirrored(rows):
    """The same motion recorded on a play heading toward x = 0."""
    return [(f, 120 - x, 53.3 - y, s, a, dis, (o + 180) % 360, (d + 180) % 360, ev)
            for f, x, y, s, a, dis, o, d, ev in rows]


def pass_rows():
    """A QB scramble after a catch-like event, used to exercise the position filter."""
    rows = []
    for i, f in enumerate(range(1, 15)):
        ev = "pass_outcome_caught" if f == 3 else ("out_of_bounds" if f == 14 else "")
        rows.append((f, 60.0 + 0.5 * i, 20.0 + 0.2 * math.sin(i), 5.0, 1.0, 0.5, 90.0, 90.0, ev))
    return rows


def write_fixture(directory, include_pass=True, include_left=True, malformed=False):
    """Write tracking, plays, players and player-play CSVs; returns their paths."""
    parts = [play_tracking(RUN_PLAY, carrier_track())]
    if include_pass:
        parts.append(play_tracking(PASS_PLAY, pass_rows(), carrier_id=QB, seed=1))
    if include_left:
        parts.append(play_tracking(LEFT_PLAY, mirrored(carrier_track()), direction="left", seed=2))
    tracking = pd.concat(parts, ignore_index=True)
    tracking["x"] = tracking["x"].map(lambda v: f"{v:.6f}")
    if malformed:
        tracking.loc[5, "x"] = "abc"
    plays = pd.DataFrame({
        "gameId": [GAME] * 3, "playId": [RUN_PLAY, PASS_PLAY, LEFT_PLAY],
        "possessionTeam": ["CIN"] * 3, "yardsToGo": [3, 10, 3], "absoluteYardlineNumber": [97, 55, 23],
        "isDropback": ["FALSE", "TRUE", "FALSE"], "playNullifiedByPenalty": ["N", "N", "Y"],
    })
    ids = [CARRIER, QB] + [2000 + k for k in range(10)] + [3000 + k for k in range(10, 21)]
    positions = ["RB", "QB"] + ["WR"] * 10 + ["CB"] * 11
    players = pd.DataFrame({"nflId": ids, "position": positions, "displayName": [f"p{i}" for i in ids]})
    player_play = pd.DataFrame({
        "gameId": [GAME] * 3, "playId": [RUN_PLAY, PASS_PLAY, LEFT_PLAY], "nflId": [CARRIER, QB, CARRIER],
        "hadRushAttempt": [1, 0, 1], "hadPassReception": [0, 1, 0],
    })
    out = {}
    for name, df in [("tracking", tracking), ("plays", plays), ("players", players), ("player_play", player_play)]:
        out[name] = directory / f"{name}.csv"
        df.to_csv(out[name], index=False)
    return out
