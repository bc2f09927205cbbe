"""Deep cross network over three learned embedding blocks.

Each response is addressed by (respondent, question, year). The input vector
concatenates three width-n blocks in this order:

    x0 = [ belief[respondent] | projection(frozen_question_vector) | period[year] ]

The projection maps frozen question vectors of any width down to n; belief
and period rows are free embedding tables. Cross layers compute
``x_{l+1} = x0 * (W_l x_l + b_l) + x_l`` (elementwise product), followed by a
ReLU feed-forward stack and a sigmoid head. Inverted dropout follows every
cross and dense layer during training only.

All gradients are written out by hand and verified against central finite
differences in the test suite; no autodiff framework is involved. Training
arithmetic is 64-bit; checkpoints store tensors at 32-bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import tensorio
from .analysis import auc
from .embeddings import embedding_array
from .errors import (
    CacheMismatchError,
    ConfigError,
    DegenerateImportanceError,
    FormatError,
    NonFiniteError,
    UndefinedMetricError,
)
from .seeding import rng_for

PROB_EPS = 1e-7


@dataclass
class DcnConfig:
    """Architecture and optimization settings.

    Defaults mirror the production configuration: width-50 blocks, three
    cross and three dense layers at width 150, dropout 0.2, Adam at 2e-5
    with a staircase exponential decay every 80000 steps.
    """

    embed_dim: int = 50
    num_cross_layers: int = 3
    num_dense_layers: int = 3
    dropout_rate: float = 0.2
    learning_rate: float = 2e-5
    decay_steps: int = 80000
    decay_rate: float = 0.96
    staircase: bool = True
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    batch_size: int = 128
    max_epochs: int = 10
    patience: int = 2
    validation_fraction: float = 0.1
    seed: int = 0

    @property
    def width(self):
        return 3 * self.embed_dim

    def validate(self):
        if self.embed_dim <= 0:
            raise ConfigError("embed_dim must be positive")
        if self.num_cross_layers < 1:
            raise ConfigError("need at least one cross layer")
        if self.num_dense_layers < 0:
            raise ConfigError("num_dense_layers cannot be negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.decay_steps <= 0:
            raise ConfigError("decay_steps must be positive")
        if not 0.0 < self.decay_rate <= 1.0:
            raise ConfigError("decay_rate must lie in (0, 1]")
        if self.batch_size <= 0 or self.max_epochs <= 0:
            raise ConfigError("batch_size and max_epochs must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be at least 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        return self


@dataclass
class DcnParameters:
    """All trainable tensors. The frozen question vectors live elsewhere."""

    proj_weight: np.ndarray  # (raw_dim, n)
    proj_bias: np.ndarray  # (n,)
    belief: np.ndarray  # (n_individuals, n)
    period: np.ndarray  # (n_years, n)
    cross_weights: list = field(default_factory=list)  # each (3n, 3n)
    cross_biases: list = field(default_factory=list)  # each (3n,)
    dense_weights: list = field(default_factory=list)  # each (3n, 3n)
    dense_biases: list = field(default_factory=list)
    head_weight: np.ndarray = None  # (3n,)
    head_bias: np.ndarray = None  # (1,)

    @property
    def embed_dim(self):
        return int(self.proj_weight.shape[1])

    @property
    def raw_dim(self):
        return int(self.proj_weight.shape[0])

    def named_tensors(self):
        """Fixed (name, array) order used by Adam state and checkpoints."""
        pairs = [
            ("proj_weight", self.proj_weight),
            ("proj_bias", self.proj_bias),
            ("belief", self.belief),
            ("period", self.period),
        ]
        for i, (w, b) in enumerate(zip(self.cross_weights, self.cross_biases)):
            pairs.append((f"cross_weight_{i}", w))
            pairs.append((f"cross_bias_{i}", b))
        for i, (w, b) in enumerate(zip(self.dense_weights, self.dense_biases)):
            pairs.append((f"dense_weight_{i}", w))
            pairs.append((f"dense_bias_{i}", b))
        pairs.append(("head_weight", self.head_weight))
        pairs.append(("head_bias", self.head_bias))
        return pairs

    def copy(self):
        return DcnParameters(
            proj_weight=self.proj_weight.copy(),
            proj_bias=self.proj_bias.copy(),
            belief=self.belief.copy(),
            period=self.period.copy(),
            cross_weights=[w.copy() for w in self.cross_weights],
            cross_biases=[b.copy() for b in self.cross_biases],
            dense_weights=[w.copy() for w in self.dense_weights],
            dense_biases=[b.copy() for b in self.dense_biases],
            head_weight=self.head_weight.copy(),
            head_bias=self.head_bias.copy(),
        )


def glorot_uniform(rng, fan_in, fan_out, shape):
    """Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg, raw_dim, n_individuals, n_years, seed=None):
    """Deterministically initialize all tensors for the given table sizes.

    Weight matrices use Glorot uniform bounds, biases start at zero, and the
    two embedding tables draw from uniform(-0.05, 0.05). Draw order is fixed
    (projection, belief, period, cross stack, dense stack, head) so a seed
    pins every tensor.
    """
    cfg.validate()
    if raw_dim <= 0 or n_individuals <= 0 or n_years <= 0:
        raise ConfigError("table sizes must be positive")
    rng = rng_for(cfg.seed if seed is None else seed, "init")
    n = cfg.embed_dim
    width = cfg.width
    params = DcnParameters(
        proj_weight=glorot_uniform(rng, raw_dim, n, (raw_dim, n)),
        proj_bias=np.zeros(n),
        belief=rng.uniform(-0.05, 0.05, size=(n_individuals, n)),
        period=rng.uniform(-0.05, 0.05, size=(n_years, n)),
        head_weight=None,
        head_bias=None,
    )
    for _ in range(cfg.num_cross_layers):
        params.cross_weights.append(glorot_uniform(rng, width, width, (width, width)))
        params.cross_biases.append(np.zeros(width))
    for _ in range(cfg.num_dense_layers):
        params.dense_weights.append(glorot_uniform(rng, width, width, (width, width)))
        params.dense_biases.append(np.zeros(width))
    params.head_weight = glorot_uniform(rng, width, 1, (width,))
    params.head_bias = np.zeros(1)
    return params


def cross_layer(x0, x, weight, bias):
    """One feature-crossing step: x0 * (W x + b) + x, batched or single."""
    pre = x @ weight.T + bias
    return x0 * pre + x


@dataclass
class ForwardCache:
    """Intermediate activations needed by backward."""

    individuals: np.ndarray
    questions: np.ndarray
    year_ranks: np.ndarray
    raw: np.ndarray
    x0: np.ndarray
    cross_inputs: list
    cross_pre: list
    cross_masks: list
    dense_inputs: list
    dense_pre: list
    dense_masks: list
    hidden: np.ndarray
    logits: np.ndarray
    probs_raw: np.ndarray
    probs: np.ndarray
    fingerprint: tuple


def _fingerprint(params):
    return (
        params.raw_dim,
        params.embed_dim,
        params.belief.shape[0],
        params.period.shape[0],
        len(params.cross_weights),
        len(params.dense_weights),
    )


def forward(
    params,
    embeddings,
    individuals,
    questions,
    year_ranks,
    training=False,
    rng=None,
    dropout_rate=0.2,
):
    """Run the network; returns (clamped probabilities, cache).

    ``embeddings`` holds one frozen row per dense question ID. With
    ``training=True`` an inverted dropout mask follows every cross and dense
    layer, drawn from ``rng``; inference applies none.
    """
    emb = embedding_array(embeddings)
    individuals = np.atleast_1d(np.asarray(individuals, dtype=np.int64))
    questions = np.atleast_1d(np.asarray(questions, dtype=np.int64))
    year_ranks = np.atleast_1d(np.asarray(year_ranks, dtype=np.int64))
    if not (individuals.shape == questions.shape == year_ranks.shape):
        raise ConfigError("individuals, questions, and year_ranks must align")
    for name, ids, limit in (
        ("individual", individuals, params.belief.shape[0]),
        ("question", questions, emb.shape[0]),
        ("year", year_ranks, params.period.shape[0]),
    ):
        if ids.size and (ids.min() < 0 or ids.max() >= limit):
            raise ConfigError(f"{name} ID out of range [0, {limit})")
    if emb.shape[1] != params.raw_dim:
        raise ConfigError(
            f"embedding width {emb.shape[1]} does not match the projection "
            f"input width {params.raw_dim}"
        )
    use_dropout = training and dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ConfigError("training-mode forward with dropout needs an rng")
    keep = 1.0 - dropout_rate

    raw = emb[questions]
    semantic = raw @ params.proj_weight + params.proj_bias
    x0 = np.concatenate(
        [params.belief[individuals], semantic, params.period[year_ranks]], axis=1
    )

    x = x0
    cross_inputs, cross_pre, cross_masks = [], [], []
    for w, b in zip(params.cross_weights, params.cross_biases):
        cross_inputs.append(x)
        pre = x @ w.T + b
        cross_pre.append(pre)
        x = x0 * pre + x
        if use_dropout:
            mask = (rng.random(x.shape) >= dropout_rate) / keep
            x = x * mask
        else:
            mask = None
        cross_masks.append(mask)

    h = x
    dense_inputs, dense_pre, dense_masks = [], [], []
    for w, b in zip(params.dense_weights, params.dense_biases):
        dense_inputs.append(h)
        pre = h @ w.T + b
        dense_pre.append(pre)
        h = np.maximum(pre, 0.0)
        if use_dropout:
            mask = (rng.random(h.shape) >= dropout_rate) / keep
            h = h * mask
        else:
            mask = None
        dense_masks.append(mask)

    logits = h @ params.head_weight + params.head_bias[0]
    probs_raw = 1.0 / (1.0 + np.exp(-logits))
    probs = np.clip(probs_raw, PROB_EPS, 1.0 - PROB_EPS)
    cache = ForwardCache(
        individuals=individuals,
        questions=questions,
        year_ranks=year_ranks,
        raw=raw,
        x0=x0,
        cross_inputs=cross_inputs,
        cross_pre=cross_pre,
        cross_masks=cross_masks,
        dense_inputs=dense_inputs,
        dense_pre=dense_pre,
        dense_masks=dense_masks,
        hidden=h,
        logits=logits,
        probs_raw=probs_raw,
        probs=probs,
        fingerprint=_fingerprint(params),
    )
    return probs, cache


def loss_bce(probs, labels):
    """Mean binary cross-entropy with probabilities clamped away from 0/1."""
    probs = np.clip(np.atleast_1d(np.asarray(probs, dtype=np.float64)), PROB_EPS, 1.0 - PROB_EPS)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.float64))
    return float(-np.mean(labels * np.log(probs) + (1.0 - labels) * np.log(1.0 - probs)))


def backward(cache, labels, params):
    """Exact gradients of the mean-batch BCE for every trainable tensor.

    The head uses the sigmoid/BCE identity d(loss)/d(logit) = p - y. The
    crossing step x_out = x0 * (W x + b) + x contributes three paths:
    through W and b, through its input x, and through x0 itself; the x0
    contributions of all layers accumulate and join the residual chain at
    the bottom before being split across the three embedding blocks.
    """
    if cache.fingerprint != _fingerprint(params):
        raise CacheMismatchError(
            "forward cache does not match these parameters; rerun forward"
        )
    labels = np.atleast_1d(np.asarray(labels, dtype=np.float64))
    if labels.shape != cache.probs.shape:
        raise ConfigError("labels must align with the cached batch")
    batch = labels.shape[0]
    n = params.embed_dim

    grads = {
        "proj_weight": np.zeros_like(params.proj_weight),
        "proj_bias": np.zeros_like(params.proj_bias),
        "belief": np.zeros_like(params.belief),
        "period": np.zeros_like(params.period),
        "head_weight": np.zeros_like(params.head_weight),
        "head_bias": np.zeros_like(params.head_bias),
    }

    g_logit = (cache.probs_raw - labels) / batch
    grads["head_weight"][:] = cache.hidden.T @ g_logit
    grads["head_bias"][0] = np.sum(g_logit)
    g = g_logit[:, None] * params.head_weight[None, :]

    for i in range(len(params.dense_weights) - 1, -1, -1):
        if cache.dense_masks[i] is not None:
            g = g * cache.dense_masks[i]
        g_pre = g * (cache.dense_pre[i] > 0.0)
        grads[f"dense_weight_{i}"] = g_pre.T @ cache.dense_inputs[i]
        grads[f"dense_bias_{i}"] = g_pre.sum(axis=0)
        g = g_pre @ params.dense_weights[i]

    g_x0 = np.zeros_like(cache.x0)
    for i in range(len(params.cross_weights) - 1, -1, -1):
        if cache.cross_masks[i] is not None:
            g = g * cache.cross_masks[i]
        gy = g * cache.x0
        grads[f"cross_weight_{i}"] = gy.T @ cache.cross_inputs[i]
        grads[f"cross_bias_{i}"] = gy.sum(axis=0)
        g_x0 += g * cache.cross_pre[i]
        g = gy @ params.cross_weights[i] + g
    g_x0 += g  # the residual chain bottoms out at x0 itself

    g_belief = g_x0[:, :n]
    g_semantic = g_x0[:, n : 2 * n]
    g_period = g_x0[:, 2 * n :]
    np.add.at(grads["belief"], cache.individuals, g_belief)
    np.add.at(grads["period"], cache.year_ranks, g_period)
    grads["proj_weight"][:] = cache.raw.T @ g_semantic
    grads["proj_bias"][:] = g_semantic.sum(axis=0)
    return grads


@dataclass
class AdamState:
    """First and second moment accumulators plus the completed step count."""

    m: dict
    v: dict
    step: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(
            m={name: np.zeros_like(t) for name, t in params.named_tensors()},
            v={name: np.zeros_like(t) for name, t in params.named_tensors()},
        )


def learning_rate_at(cfg, completed_steps):
    """Exponentially decayed rate for the step after ``completed_steps``."""
    exponent = completed_steps / cfg.decay_steps
    if cfg.staircase:
        exponent = np.floor(exponent)
    return cfg.learning_rate * cfg.decay_rate**exponent


def adam_step(params, grads, state, cfg):
    """One in-place Adam update over every tensor; returns (params, state)."""
    lr = learning_rate_at(cfg, state.step)
    t = state.step + 1
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t
    for name, tensor in params.named_tensors():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for tensor {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        tensor -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    state.step = t
    return params, state


def predict_proba_arrays(
    params, embeddings, individuals, questions, year_ranks, chunk=8192
):
    """Inference-mode probabilities, batched to bound peak memory."""
    emb = embedding_array(embeddings)
    individuals = np.asarray(individuals, dtype=np.int64)
    out = np.empty(individuals.shape[0], dtype=np.float64)
    for start in range(0, individuals.shape[0], chunk):
        sl = slice(start, start + chunk)
        probs, _ = forward(
            params,
            emb,
            individuals[sl],
            np.asarray(questions)[sl],
            np.asarray(year_ranks)[sl],
            training=False,
        )
        out[sl] = probs
    return out


@dataclass(frozen=True)
class FeatureImportance:
    """Normalized block norms of the first cross layer's weight matrix."""

    semantic: float
    belief: float
    period: float
    semantic_belief: float
    semantic_period: float
    belief_period: float

    def as_dict(self):
        return {
            "semantic": self.semantic,
            "belief": self.belief,
            "period": self.period,
            "semantic_belief": self.semantic_belief,
            "semantic_period": self.semantic_period,
            "belief_period": self.belief_period,
        }


def feature_importance(params):
    """Share of first-cross-layer weight mass per block and block pair.

    With x0 = [belief | semantic | period], the three diagonal n x n blocks
    measure each embedding's own crossing strength and each off-diagonal
    block pair, averaged, measures one pairwise interaction. All six
    Frobenius norms are divided by their sum.
    """
    if not params.cross_weights:
        raise DegenerateImportanceError("model has no cross layer")
    w = params.cross_weights[0]
    n = params.embed_dim
    blocks = {}
    spans = {"belief": slice(0, n), "semantic": slice(n, 2 * n), "period": slice(2 * n, 3 * n)}
    for name, span in spans.items():
        blocks[name] = float(np.linalg.norm(w[span, span]))

    def pair(a, b):
        return 0.5 * (
            float(np.linalg.norm(w[spans[a], spans[b]]))
            + float(np.linalg.norm(w[spans[b], spans[a]]))
        )

    raw = {
        "semantic": blocks["semantic"],
        "belief": blocks["belief"],
        "period": blocks["period"],
        "semantic_belief": pair("semantic", "belief"),
        "semantic_period": pair("semantic", "period"),
        "belief_period": pair("belief", "period"),
    }
    total = sum(raw.values())
    if total == 0.0:
        raise DegenerateImportanceError("all cross-layer blocks are zero")
    return FeatureImportance(**{k: v / total for k, v in raw.items()})


MODEL_KIND = "deep-cross-opinion"


def save_checkpoint(path, params, cfg, index_maps):
    """Persist tensors (float32), config, and the dense ID maps."""
    tensors = dict(params.named_tensors())
    extras = {
        "model": MODEL_KIND,
        "config": asdict(cfg),
        "raw_dim": params.raw_dim,
        "index_maps": {
            "individuals": [int(k) for k in index_maps["individuals"]],
            "variables": [str(v) for v in index_maps["variables"]],
            "years": [int(y) for y in index_maps["years"]],
        },
    }
    tensorio.save_bundle(path, tensors, extras)


def load_checkpoint(path):
    """Load (params, cfg, index_maps); tensors widen back to float64."""
    tensors, extras = tensorio.load_bundle(path)
    if extras.get("model") != MODEL_KIND:
        raise FormatError(f"{path}: not a {MODEL_KIND} checkpoint")
    cfg = DcnConfig(**extras["config"]).validate()
    params = DcnParameters(
        proj_weight=tensors["proj_weight"].astype(np.float64),
        proj_bias=tensors["proj_bias"].astype(np.float64),
        belief=tensors["belief"].astype(np.float64),
        period=tensors["period"].astype(np.float64),
        cross_weights=[
            tensors[f"cross_weight_{i}"].astype(np.float64)
            for i in range(cfg.num_cross_layers)
        ],
        cross_biases=[
            tensors[f"cross_bias_{i}"].astype(np.float64)
            for i in range(cfg.num_cross_layers)
        ],
        dense_weights=[
            tensors[f"dense_weight_{i}"].astype(np.float64)
            for i in range(cfg.num_dense_layers)
        ],
        dense_biases=[
            tensors[f"dense_bias_{i}"].astype(np.float64)
            for i in range(cfg.num_dense_layers)
        ],
        head_weight=tensors["head_weight"].astype(np.float64),
        head_bias=tensors["head_bias"].astype(np.float64),
    )
    return params, cfg, extras["index_maps"]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_score: float | None
    learning_rate: float


def train_loop(params, embeddings, train, val, cfg, seed, labels=()):
    """Epoch loop with seeded shuffling and AUC-based early stopping.

    ``train`` and ``val`` are (individuals, questions, year_ranks, labels)
    tuples; ``val`` may be None, in which case all epochs run and the final
    parameters win. Validation scoring prefers AUC and falls back to
    negative mean loss when the slice is single class. Returns
    (best_params, history, best_epoch).
    """
    cfg.validate()
    emb = embedding_array(embeddings)
    t_ind, t_q, t_yr, t_lab = (np.asarray(a) for a in train)
    n_train = t_ind.shape[0]
    if n_train == 0:
        raise ConfigError("training split is empty")
    rng_shuffle = rng_for(seed, "shuffle", *labels)
    rng_dropout = rng_for(seed, "dropout", *labels)
    state = AdamState.for_params(params)

    best = params.copy()
    best_score = -np.inf
    best_epoch = -1
    stall = 0
    history = []
    for epoch in range(cfg.max_epochs):
        perm = rng_shuffle.permutation(n_train)
        loss_sum = 0.0
        for start in range(0, n_train, cfg.batch_size):
            rows = perm[start : start + cfg.batch_size]
            probs, cache = forward(
                params,
                emb,
                t_ind[rows],
                t_q[rows],
                t_yr[rows],
                training=True,
                rng=rng_dropout,
                dropout_rate=cfg.dropout_rate,
            )
            batch_loss = loss_bce(probs, t_lab[rows])
            if not np.isfinite(batch_loss):
                raise NonFiniteError(f"training loss became {batch_loss} at epoch {epoch}")
            loss_sum += batch_loss * len(rows)
            grads = backward(cache, t_lab[rows], params)
            adam_step(params, grads, state, cfg)
        train_loss = loss_sum / n_train

        val_score = None
        if val is not None:
            v_ind, v_q, v_yr, v_lab = (np.asarray(a) for a in val)
            v_probs = predict_proba_arrays(params, emb, v_ind, v_q, v_yr)
            try:
                val_score = auc(v_lab, v_probs)
            except UndefinedMetricError:
                val_score = -loss_bce(v_probs, v_lab)
        history.append(
            EpochRecord(epoch, train_loss, val_score, learning_rate_at(cfg, state.step))
        )
        if val is None:
            best = params.copy()
            best_epoch = epoch
            continue
        if val_score > best_score:
            best_score = val_score
            best = params.copy()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= cfg.patience:
                break
    return best, history, best_epoch


class DeepCrossOpinionModel(BaseEstimator):
    """Estimator-style wrapper around the functional network.

    ``X`` is an integer matrix with one row per response and columns
    [individual ID, question ID, year rank]; ``y`` holds 0/1 responses. The
    frozen question vectors arrive through ``fit``. A row-level validation
    slice drives early stopping.
    """

    def __init__(
        self,
        embed_dim=50,
        num_cross_layers=3,
        num_dense_layers=3,
        dropout_rate=0.2,
        learning_rate=2e-5,
        decay_steps=80000,
        decay_rate=0.96,
        staircase=True,
        batch_size=128,
        max_epochs=10,
        patience=2,
        validation_fraction=0.1,
        seed=0,
    ):
        self.embed_dim = embed_dim
        self.num_cross_layers = num_cross_layers
        self.num_dense_layers = num_dense_layers
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.decay_steps = decay_steps
        self.decay_rate = decay_rate
        self.staircase = staircase
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _config(self):
        return DcnConfig(
            embed_dim=self.embed_dim,
            num_cross_layers=self.num_cross_layers,
            num_dense_layers=self.num_dense_layers,
            dropout_rate=self.dropout_rate,
            learning_rate=self.learning_rate,
            decay_steps=self.decay_steps,
            decay_rate=self.decay_rate,
            staircase=self.staircase,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            validation_fraction=self.validation_fraction,
            seed=self.seed,
        ).validate()

    def fit(self, X, y, question_embeddings=None, n_individuals=None, n_years=None):
        if question_embeddings is None:
            raise ConfigError("fit needs the frozen question_embeddings matrix")
        X = np.asarray(X, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != 3:
            raise ConfigError("X must be (n_samples, 3): individual, question, year")
        cfg = self._config()
        emb = embedding_array(question_embeddings)
        n_individuals = n_individuals or int(X[:, 0].max()) + 1
        n_years = n_years or int(X[:, 2].max()) + 1
        params = init_params(cfg, emb.shape[1], n_individuals, n_years)

        rng = rng_for(cfg.seed, "estimator-validation")
        perm = rng.permutation(X.shape[0])
        n_val = max(1, int(round(cfg.validation_fraction * X.shape[0])))
        val_rows = perm[:n_val]
        train_rows = perm[n_val:]
        if train_rows.size == 0:
            train_rows, val = perm, None
        else:
            val = (X[val_rows, 0], X[val_rows, 1], X[val_rows, 2], y[val_rows])
        train = (X[train_rows, 0], X[train_rows, 1], X[train_rows, 2], y[train_rows])
        self.params_, self.history_, self.best_epoch_ = train_loop(
            params, emb, train, val, cfg, cfg.seed, labels=("estimator",)
        )
        self.config_ = cfg
        self.embeddings_ = emb
        self.classes_ = np.array([0, 1])
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise ConfigError("model is not fitted yet")

    def predict_proba(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=np.int64)
        p = predict_proba_arrays(
            self.params_, self.embeddings_, X[:, 0], X[:, 1], X[:, 2]
        )
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def feature_importance(self):
        self._check_fitted()
        return feature_importance(self.params_)
