"""Independent reference implementations used as test oracles.

These are deliberately written without reusing the library's code paths:
plain-python loops and brute-force scans that the fast implementations
are checked against.
"""

import numpy as np

from isac_ident.mlp import _forward_layers, init_weights, normalize_inputs
from isac_ident.mlp import ModelWidths, NormBounds, loss_and_grad_arrays


def reference_dbscan(points, eps, min_pts):
    """Brute-force density clustering: explicit O(n^2) neighborhoods,
    index-order seeding, first-touch labels."""
    pts = [tuple(map(float, p)) for p in points]
    n = len(pts)

    def neighbors(i):
        out = []
        for j in range(n):
            d2 = sum((a - b) ** 2 for a, b in zip(pts[i], pts[j]))
            if d2 <= eps * eps:
                out.append(j)
        return out

    labels = [-1] * n
    seen = [False] * n
    cid = 0
    for i in range(n):
        if seen[i]:
            continue
        seen[i] = True
        hood = neighbors(i)
        if len(hood) < min_pts:
            continue
        labels[i] = cid
        queue = list(hood)
        k = 0
        while k < len(queue):
            j = queue[k]
            k += 1
            if labels[j] == -1:
                labels[j] = cid
            if not seen[j]:
                seen[j] = True
                hood_j = neighbors(j)
                if len(hood_j) >= min_pts:
                    queue.extend(hood_j)
        cid += 1
    return labels


def canonical_labels(labels):
    """Rename cluster ids by first appearance so partitions compare directly."""
    mapping, out = {}, []
    for lab in labels:
        if lab == -1:
            out.append(-1)
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return out


GRAD_CHECK_NORM = NormBounds(range_max=100.0, angle_span=180.0, vel_max=20.0, n_beams=16)
GRAD_CHECK_WIDTHS = ModelWidths(radar=(4, 6, 8), beam=(4, 6, 8), head=(8, 6, 4))


def draw_grad_check_case(seed):
    rng = np.random.default_rng(seed)
    model = init_weights(GRAD_CHECK_WIDTHS, GRAD_CHECK_NORM, seed=seed)
    n = 4
    feats = np.column_stack([rng.uniform(5, 95, n), rng.uniform(-80, 80, n),
                             rng.uniform(-18, 18, n)])
    beams = rng.integers(0, 16, n).astype(float)
    targets = rng.integers(0, 2, n).astype(float)
    return model, feats, beams, targets


def min_relu_preactivation(model, feats, beams):
    """Smallest |z| over all relu pre-activations; finite differences are
    only trustworthy when no relu sits within the probe step of its kink."""
    xr, xb = normalize_inputs(model.norm, feats, beams)
    lo = np.inf
    ar, cr = _forward_layers(model.radar_branch, xr)
    ab, cb = _forward_layers(model.beam_branch, xb)
    h = np.concatenate([ar, ab], axis=1)
    _, ch = _forward_layers(model.head, h)
    for caches, layers in ((cr, model.radar_branch), (cb, model.beam_branch),
                           (ch, model.head)):
        for (_, z, _), layer in zip(caches, layers):
            if layer.activation == "relu":
                lo = min(lo, float(np.abs(z).min()))
    return lo


def finite_difference_grads(model, feats, beams, targets, h=1e-4):
    """Central differences through the full loss, one parameter at a time."""
    grads = []
    for p in model.parameters():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lo_p, _ = loss_and_grad_arrays(model, feats, beams, targets)
            flat[i] = orig - h
            lo_m, _ = loss_and_grad_arrays(model, feats, beams, targets)
            flat[i] = orig
            gflat[i] = (lo_p - lo_m) / (2 * h)
        grads.append(g)
    return grads
