"""Independent re-derivations used to check pipeline outputs.

Everything here is deliberately brute force and shares no code with the
implementation paths it verifies.
"""

import math

import numpy as np


def collision_violations(scene) -> int:
    """Count pairs closer than the sum of their scaled collision radii."""
    gen_of = {g.name: g for g in scene.generators}
    inst = scene.instances
    n = len(inst)
    bad = 0
    for i in range(n):
        gi = gen_of[inst[i].generator]
        ri = gi.collision_radius * inst[i].scale
        for j in range(i + 1, n):
            gj = gen_of[inst[j].generator]
            rj = gj.collision_radius * inst[j].scale
            d = math.hypot(inst[i].x - inst[j].x, inst[i].y - inst[j].y)
            if d < ri + rj - 1e-9:
                bad += 1
    return bad


def shade_violations(scene) -> int:
    """Count age-1 shade-intolerant survivors that sat inside an elder's
    scaled shade radius when they were screened (their age was 0 then, and
    every other survivor was already age >= 1)."""
    gen_of = {g.name: g for g in scene.generators}
    bad = 0
    for inst in scene.instances:
        gen = gen_of[inst.generator]
        if gen.can_grow_in_shade or inst.age != 1:
            continue
        for other in scene.instances:
            if other is inst or other.age <= 1:
                continue
            shade = gen_of[other.generator].shade_radius * other.scale
            if math.hypot(inst.x - other.x, inst.y - other.y) < shade - 1e-9:
                bad += 1
    return bad


def age_violations(scene) -> int:
    gen_of = {g.name: g for g in scene.generators}
    return sum(1 for i in scene.instances if i.age > gen_of[i.generator].max_age)


def containment_violations(scene) -> int:
    e = scene.extent
    return sum(
        1
        for i in scene.instances
        if not (e.xmin <= i.x <= e.xmax and e.ymin <= i.y <= e.ymax)
    )


def exhaustive_greedy_match(pred, gt, iou_threshold=0.5):
    """Reference matcher: rescan all remaining pairs for the best IoU each
    round (same descending-IoU, one-to-one rule as the fast path)."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    pred_ids = [int(p) for p in np.unique(pred) if p != 0]
    gt_ids = [int(g) for g in np.unique(gt) if g != 0]
    ious = {}
    for p in pred_ids:
        pm = pred == p
        for g in gt_ids:
            gm = gt == g
            inter = int(np.count_nonzero(pm & gm))
            union = int(np.count_nonzero(pm | gm))
            if inter:
                ious[(p, g)] = inter / union
    matches = []
    remaining = dict(ious)
    while remaining:
        # Max IoU with (pred, gt) tie-break, matching the production rule.
        (p, g), iou = min(remaining.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
        if iou < iou_threshold:
            break
        matches.append((p, g, iou))
        remaining = {k: v for k, v in remaining.items() if k[0] != p and k[1] != g}
    tp = len(matches)
    precision = 100.0 * tp / len(pred_ids) if pred_ids else 0.0
    recall = 100.0 * tp / len(gt_ids) if gt_ids else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    mean_iou = 100.0 * sum(m[2] for m in matches) / tp if tp else 0.0
    return matches, precision, recall, f1, mean_iou
