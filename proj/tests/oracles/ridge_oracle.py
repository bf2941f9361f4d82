#!/usr/bin/env python3
"""Independent least-squares oracle for ridge cross-validation.

Reads sessions exported with `echoface dataset --npy` and reproduces the
regression from first principles: every window is materialized as an explicit
row of the design matrix, the normal equations are formed from those rows and
solved with a general LU solve. Prints per-fold and mean MAE/LMAE/UMAE/PL40/PU60
as JSON.

    ridge_oracle.py --folds 6 --lam 1e-4 DIR/s100 DIR/s101 ...
"""

import argparse
import json
import pathlib
import sys

import numpy as np

WINDOW = 84
SCALED_MAX = 1000.0


def load(path):
    p = pathlib.Path(path)
    meta = json.loads((p / "meta.json").read_text())
    cols = np.load(p / "columns.npy")  # frames x rows
    gt = np.load(p / "gt.npy")  # frames x 52
    assert meta["window_frames"] == WINDOW
    return {"id": meta["session_id"], "cols": cols, "gt": gt, "names": meta["blendshapes"]}


def design(s):
    """Row i holds frames i+1 .. i+WINDOW, oldest first, each frame's rows contiguous."""
    c = s["cols"]
    m = c.shape[0] - WINDOW
    x = np.lib.stride_tricks.sliding_window_view(c[1:], (WINDOW, c.shape[1]))[:, 0]
    return np.ascontiguousarray(x.reshape(m, -1))


def change_targets(s):
    gt = s["gt"]
    m = gt.shape[0] - WINDOW
    return gt[WINDOW:WINDOW + m] - gt[:m]


def raw_stats(s):
    """Uncentred sums over the explicit design rows."""
    x = design(s)
    y = change_targets(s)
    return {"n": x.shape[0], "xtx": x.T @ x, "xsum": x.sum(0), "xty": x.T @ y, "ysum": y.sum(0)}


def norm_stats(train):
    c = np.concatenate([s["cols"][1:] for s in train])
    mean = c.mean(0)
    scale = c.std(0)
    floor = 1e-12 * max(1.0, scale.max())
    scale[scale <= floor] = 1.0
    return mean, scale


def fit(train, stats, lam):
    mean, scale = norm_stats(train)
    d = np.tile(1.0 / scale, WINDOW)
    n = sum(stats[s["id"]]["n"] for s in train)
    xtx = sum(stats[s["id"]]["xtx"] for s in train)
    xsum = sum(stats[s["id"]]["xsum"] for s in train)
    xty = sum(stats[s["id"]]["xty"] for s in train)
    ysum = sum(stats[s["id"]]["ysum"] for s in train)
    mu = xsum / n
    # Covariance of the standardized inputs and their cross-covariance with y.
    a = (xtx - n * np.outer(mu, mu)) * np.outer(d, d)
    b = (xty - np.outer(mu, ysum)) * d[:, None]
    lam_eff = lam * a.diagonal().mean()
    w = np.linalg.solve(a + lam_eff * np.eye(a.shape[0]), b)
    mu_n = (mu - np.tile(mean, WINDOW)) * d
    bias = ysum / n - mu_n @ w
    rest = np.min([s["gt"].min(0) for s in train], axis=0)
    return {"mean": np.tile(mean, WINDOW), "d": d, "w": w, "bias": bias, "rest": rest}


def predict(model, s):
    x = (design(s) - model["mean"]) * model["d"]
    return np.clip(model["rest"] + x @ model["w"] + model["bias"], 0.0, SCALED_MAX)


def metrics(pred, gt, upper):
    err = np.abs(pred - gt)
    lmae = err[:, ~upper].mean(1)
    umae = err[:, upper].mean(1)
    return {
        "frames": int(err.shape[0]),
        "mae": float(err.mean()),
        "lmae": float(lmae.mean()),
        "umae": float(umae.mean()),
        "pl40": float(100.0 * np.mean(lmae < 40.0)),
        "pu60": float(100.0 * np.mean(umae < 60.0)),
    }


def main(argv):
    ap = argparse.ArgumentParser()
    ap.add_argument("--folds", type=int, default=6)
    ap.add_argument("--lam", type=float, default=1e-4)
    ap.add_argument("sessions", nargs="+")
    args = ap.parse_args(argv)

    sessions = [load(p) for p in args.sessions]
    names = sessions[0]["names"]
    upper = np.array([n.startswith("eye") or n.startswith("brow") for n in names])
    assert upper.sum() == 19 and (~upper).sum() == 33
    stats = {s["id"]: raw_stats(s) for s in sessions}

    n = len(sessions)
    folds = []
    for f in range(args.folds):
        lo, hi = f * n // args.folds, (f + 1) * n // args.folds
        test = sessions[lo:hi]
        train = sessions[:lo] + sessions[hi:]
        model = fit(train, stats, args.lam)
        pred = np.concatenate([predict(model, s) for s in test])
        gt = np.concatenate([s["gt"][WINDOW:] for s in test])
        folds.append({"fold": f, "test": [s["id"] for s in test], **metrics(pred, gt, upper)})
        print(f"fold {f}: mae {folds[-1]['mae']:.9f} pl40 {folds[-1]['pl40']:.6f}", file=sys.stderr)

    keys = ["mae", "lmae", "umae", "pl40", "pu60"]
    mean = {k: float(np.mean([f[k] for f in folds])) for k in keys}
    print(json.dumps({"lambda": args.lam, "folds": folds, "mean": mean}, indent=2))


if __name__ == "__main__":
    main(sys.argv[1:])
