"""Shared builders for the test modules."""
import numpy as np

from mapcomp.geometry import BevRange, MapClass, MapElement, VectorMap
from mapcomp.scene_io import Scene, SynthConfig, generate_synthetic


def synth(lane_count=3, seed=0, curvature=0.0, crossings=1, dash=0.5, scene_id=None):
    cfg = SynthConfig(lane_count=lane_count, curvature=curvature, crossing_count=crossings,
                      dash_probability=dash, seed=seed)
    return generate_synthetic(cfg, scene_id)


def synth_batch(n, seed=0):
    """Varied synthetic scenes, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(synth(
            lane_count=int(rng.integers(1, 5)),
            seed=int(rng.integers(0, 2 ** 31)),
            curvature=float(rng.uniform(-0.02, 0.02)),
            crossings=int(rng.integers(0, 3)),
            dash=float(rng.uniform()),
            scene_id=f"s{i:04d}",
        ))
    return out


def line(eid, cls, pts, **kw):
    return MapElement(eid, cls, np.asarray(pts, dtype=float), **kw)


def small_map(elements, rng=None):
    return VectorMap(tuple(elements), rng or BevRange())


def scene_of(elements, scene_id="t"):
    return Scene(scene_id, small_map(elements))


# -- brute-force AP oracle ----------------------------------------------------

def chamfer_oracle(a, b):
    import math
    da = sum(min(math.dist(p[:2], q[:2]) for q in b) for p in a) / len(a)
    db = sum(min(math.dist(p[:2], q[:2]) for q in a) for p in b) / len(b)
    return 0.5 * (da + db)


def ap_oracle(preds, gts, tau):
    """Explicit greedy matching, then rectangle summation under the precision envelope.

    ``preds`` is a list of ``(points, confidence)``; returns None without gts.
    """
    if not gts:
        return None
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][1], i))
    taken = [False] * len(gts)
    flags = []
    for i in order:
        best_j, best_d = None, None
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            d = chamfer_oracle(preds[i][0], g)
            if best_d is None or d < best_d:
                best_j, best_d = j, d
        hit = best_j is not None and best_d < tau
        if hit:
            taken[best_j] = True
        flags.append(hit)
    tp = 0
    curve = []  # (recall, precision) after each ranked prediction
    for rank, hit in enumerate(flags, start=1):
        tp += hit
        curve.append((tp / len(gts), tp / rank))
    area, prev_recall = 0.0, 0.0
    for r, _ in curve:
        if r > prev_recall:
            envelope = max(p for rr, p in curve if rr >= r)
            area += (r - prev_recall) * envelope
            prev_recall = r
    return area


def random_ap_instance(rng, max_gts=5, max_preds=6):
    """Small single-class instance with near, far and duplicate predictions."""
    n_gt = int(rng.integers(1, max_gts + 1))
    n_pred = int(rng.integers(0, max_preds + 1))
    gts = [rng.uniform(-10, 10, size=(int(rng.integers(2, 5)), 2)) for _ in range(n_gt)]
    preds = []
    for _ in range(n_pred):
        base = gts[int(rng.integers(0, n_gt))]
        pts = base + rng.normal(0, rng.choice([0.05, 0.4, 1.5, 5.0]), size=base.shape)
        # coarse confidences so ties appear
        conf = float(np.round(rng.uniform(), 1))
        preds.append((pts, conf))
    tau = float(rng.choice([0.5, 1.0, 1.5]))
    return preds, gts, tau
