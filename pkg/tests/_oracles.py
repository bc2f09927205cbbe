"""Independent reference implementations used to verify the package.

Everything here is deliberately written the slow, obvious way (explicit
loops, O(n^2) counting, central differences) so it shares no code paths
with the implementations under test.
"""

import math

import numpy as np

from surveycast.dcn import DcnConfig, forward, init_params, loss_bce


def pairwise_auc(labels, scores):
    """O(n^2) pairwise counting with ties worth one half."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def scalar_forward_prob(params, emb, i, q, yr):
    """Re-evaluate the network for one example with plain Python loops."""
    n = params.embed_dim
    width = 3 * n
    raw = [float(v) for v in emb[q]]
    semantic = []
    for k in range(n):
        s = float(params.proj_bias[k])
        for d in range(len(raw)):
            s += raw[d] * float(params.proj_weight[d, k])
        semantic.append(s)
    x0 = (
        [float(v) for v in params.belief[i]]
        + semantic
        + [float(v) for v in params.period[yr]]
    )
    x = list(x0)
    for w, b in zip(params.cross_weights, params.cross_biases):
        nxt = []
        for j in range(width):
            pre = float(b[j])
            for k in range(width):
                pre += float(w[j, k]) * x[k]
            nxt.append(x0[j] * pre + x[j])
        x = nxt
    h = x
    for w, b in zip(params.dense_weights, params.dense_biases):
        nxt = []
        for j in range(width):
            pre = float(b[j])
            for k in range(width):
                pre += float(w[j, k]) * h[k]
            nxt.append(pre if pre > 0.0 else 0.0)
        h = nxt
    logit = float(params.head_bias[0])
    for j in range(width):
        logit += float(params.head_weight[j]) * h[j]
    return 1.0 / (1.0 + math.exp(-logit))


def finite_difference_grads(params, emb, ind, q, yr, labels, h=1e-5):
    """Central-difference gradient of the mean BCE for every tensor."""

    def objective():
        probs, _ = forward(params, emb, ind, q, yr, training=False)
        return loss_bce(probs, labels)

    out = {}
    for name, tensor in params.named_tensors():
        grad = np.zeros_like(tensor)
        flat_t = tensor.reshape(-1)
        flat_g = grad.reshape(-1)
        for j in range(flat_t.size):
            orig = flat_t[j]
            flat_t[j] = orig + h
            up = objective()
            flat_t[j] = orig - h
            down = objective()
            flat_t[j] = orig
            flat_g[j] = (up - down) / (2.0 * h)
        out[name] = grad
    return out


def gradient_relative_error(analytic, numeric):
    """max over entries of |a - f| / max(|a|, |f|, 1e-3).

    Relative above the 1e-3 scale, absolute at that scale below it; the
    floor keeps finite-difference round-off on near-zero entries from
    registering as disagreement while still catching real sign or factor
    errors on small gradients.
    """
    worst = 0.0
    for name in analytic:
        a = analytic[name]
        f = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-3)
        worst = max(worst, float(np.max(np.abs(a - f) / denom)))
    return worst


def random_tiny_setup(rng):
    """A small random network plus a batch, safe for finite differences.

    Configurations whose dense pre-activations sit near the ReLU kink are
    redrawn, since central differences straddle the kink there and stop
    approximating the one-sided derivative.
    """
    while True:
        n = 2 * int(rng.integers(1, 3))
        cfg = DcnConfig(
            embed_dim=n,
            num_cross_layers=int(rng.integers(1, 3)),
            num_dense_layers=int(rng.integers(0, 3)),
            dropout_rate=0.0,
            seed=int(rng.integers(1_000_000)),
        )
        raw_dim = int(rng.integers(2, 7))
        n_ind = int(rng.integers(2, 6))
        n_yr = int(rng.integers(2, 5))
        n_q = int(rng.integers(2, 6))
        params = init_params(cfg, raw_dim, n_ind, n_yr)
        emb = rng.normal(size=(n_q, raw_dim))
        batch = int(rng.integers(2, 9))
        ind = rng.integers(0, n_ind, batch)
        q = rng.integers(0, n_q, batch)
        yr = rng.integers(0, n_yr, batch)
        labels = rng.integers(0, 2, batch)
        _, cache = forward(params, emb, ind, q, yr, training=False)
        clear = all(
            np.min(np.abs(pre)) > 1e-3 for pre in cache.dense_pre
        ) if cache.dense_pre else True
        if clear:
            return cfg, params, emb, ind, q, yr, labels


def grid_logistic_1d(features, labels, l2, levels=4, grid_points=61, half_width=6.0):
    """Coarse-to-fine lattice maximization of the penalized logistic objective.

    Independent of the Newton solver: evaluates the penalized log-likelihood
    on a 2-d grid over (intercept, coefficient) centred at zero, then zooms
    on the best cell. Supports a single feature column. Final resolution is
    about half_width * (2 / (grid_points - 1)) ** levels, far below 1e-3 at
    the defaults.
    """
    x = np.asarray(features, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64)
    a_lo, a_hi = -half_width, half_width
    b_lo, b_hi = -half_width, half_width
    best = (0.0, 0.0)
    for _ in range(levels):
        a_grid = np.linspace(a_lo, a_hi, grid_points)
        b_grid = np.linspace(b_lo, b_hi, grid_points)
        z = a_grid[:, None, None] + b_grid[None, :, None] * x[None, None, :]
        loglik = np.sum(y[None, None, :] * z - np.logaddexp(0.0, z), axis=2)
        objective = loglik - 0.5 * l2 * b_grid[None, :] ** 2
        ai, bi = np.unravel_index(int(np.argmax(objective)), objective.shape)
        best = (float(a_grid[ai]), float(b_grid[bi]))
        a_step = float(a_grid[1] - a_grid[0])
        b_step = float(b_grid[1] - b_grid[0])
        a_lo, a_hi = best[0] - a_step, best[0] + a_step
        b_lo, b_hi = best[1] - b_step, best[1] + b_step
    return best
