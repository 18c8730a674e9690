"""Savitzky-Golay smoothing and training-curve export."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np


def _fit_eval(t: np.ndarray, y: np.ndarray, order: int, at: float) -> float:
    # least-squares polynomial in centred, scaled coordinates for conditioning
    c = t.mean()
    h = max(np.abs(t - c).max(), 1.0)
    V = np.vander((t - c) / h, order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    x = (at - c) / h
    return float(np.polyval(coef[::-1], x))


def savgol(y: Sequence[float], window: int, order: int) -> np.ndarray:
    """Smooth ``y`` by a degree-``order`` least-squares fit over each window.

    Interior points use the centred window of odd length ``window``. Near
    the ends the window shrinks symmetrically (it stays centred on the
    point) but never below ``order + 1`` samples; once it cannot shrink
    further, the first or last ``order + 1`` samples are used. Series
    shorter than ``order + 1`` are returned unchanged.
    """
    y = np.asarray(y, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    if not 0 <= order < window:
        raise ValueError("order must satisfy 0 <= order < window")
    n = y.size
    if n <= order:
        return y.copy()
    half = window // 2
    min_len = order + 1
    t = np.arange(n, dtype=float)
    # interior: one fixed convolution kernel
    V = np.vander(np.arange(-half, half + 1, dtype=float), order + 1, increasing=True)
    kernel = np.linalg.pinv(V)[0]
    out = np.empty(n)
    if n >= window:
        out[half:n - half] = np.correlate(y, kernel, mode="valid")
    for i in range(n):
        if half <= i < n - half:
            continue
        h = min(i, n - 1 - i, half)
        lo, hi = i - h, i + h + 1
        if hi - lo < min_len:
            lo = max(0, min(lo, n - min_len))
            hi = lo + min_len
        out[i] = _fit_eval(t[lo:hi], y[lo:hi], order, t[i])
    return out


def _write(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def read_metrics(path) -> Dict[str, List[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    return {name: [r[j] for r in body] for j, name in enumerate(header)}


def export_curves(metrics_csv, out_dir, window: int = 51, order: int = 3) -> List[Path]:
    """Write ``reward_curve.csv`` (raw + smoothed) and ``arm_probabilities.csv``."""
    cols = read_metrics(metrics_csv)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    episodes = [int(e) for e in cols["episode"]]
    reward = np.array(cols["reward"], dtype=float)
    # a short log cannot hold a long window; shrink it to the largest odd size
    w = min(window, reward.size if reward.size % 2 else reward.size - 1)
    smooth = savgol(reward, w, min(order, w - 1)) if w >= 1 else reward
    reward_path = out / "reward_curve.csv"
    _write(reward_path, ("episode", "reward", "reward_smoothed"),
           zip(episodes, reward.tolist(), smooth.tolist()))
    p_names = sorted((c for c in cols if c.startswith("p_")), key=lambda c: int(c[2:]))
    prob_path = out / "arm_probabilities.csv"
    _write(prob_path, ["episode"] + p_names,
           ([e] + [float(cols[c][k]) for c in p_names] for k, e in enumerate(episodes)))
    return [reward_path, prob_path]
