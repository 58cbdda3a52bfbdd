"""Linear-chain CRF: feature templates, exact inference, MLE training.

State features follow fixed templates over the word, its casing/shape, its
POS tag and the previous word's counterparts, plus BEG/END sentence markers.
Scores decompose as state terms plus begin/transition/end terms; the
partition function and marginals come from forward-backward in log space and
decoding from max-sum with backpointers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Sentence
from .numgrad import AdamW, Tensor

FeatureSet = list[str]


class CrfError(ValueError):
    """Unknown label, inconsistent inputs, or failed training."""


def extract_features(sentence: Sentence, t: int) -> FeatureSet:
    """Feature names for position ``t``, in canonical template order."""
    tokens = sentence.tokens
    if not 0 <= t < len(tokens):
        raise CrfError(f"position {t} outside sentence of length {len(tokens)}")
    word = tokens[t].word
    feats = [
        f"word.lower={word.lower()}",
        f"word[-3:]={word[-3:]}",
        f"word[-2:]={word[-2:]}",
        f"word.isupper={word.isupper()}",
        f"word.isdigit={word.isdigit()}",
        f"word.istitle={word.istitle()}",
        f"postag={tokens[t].pos}",
    ]
    if t > 0:
        prev = tokens[t - 1].word
        feats += [
            f"-1:word.lower={prev.lower()}",
            f"-1:word.isupper={prev.isupper()}",
            f"-1:word.isdigit={prev.isdigit()}",
            f"-1:word.istitle={prev.istitle()}",
            f"-1:postag={tokens[t - 1].pos}",
        ]
    if t == 0:
        feats.append("BEG")
    if t == len(tokens) - 1:
        feats.append("END")
    return feats


def sentence_features(sentence: Sentence) -> list[FeatureSet]:
    return [extract_features(sentence, t) for t in range(len(sentence.tokens))]


@dataclass
class CrfModel:
    labels: list[str]
    label_index: dict[str, int]
    feature_index: dict[str, int]
    state_weights: np.ndarray       # [F, Y]
    transitions: np.ndarray         # [Y, Y]
    begin_transitions: np.ndarray   # [Y]
    end_transitions: np.ndarray     # [Y]

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    def state_weight(self, feature: str, label: str) -> float:
        row = self.feature_index.get(feature)
        if row is None:
            return 0.0
        return float(self.state_weights[row, self.label_index[label]])

    def label_ids(self, y: list[str]) -> np.ndarray:
        try:
            return np.array([self.label_index[t] for t in y], dtype=np.int64)
        except KeyError as exc:
            raise CrfError(f"unknown label {exc.args[0]!r}") from None


@dataclass
class CrfTrainConfig:
    epochs: int = 30
    lr: float = 0.5
    l2: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise CrfError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2 < 0:
            raise CrfError(f"l2 must be >= 0, got {self.l2}")


def empty_model(labels: list[str], feature_index: dict[str, int]) -> CrfModel:
    num_labels = len(labels)
    return CrfModel(
        labels=list(labels),
        label_index={t: i for i, t in enumerate(labels)},
        feature_index=dict(feature_index),
        state_weights=np.zeros((len(feature_index), num_labels)),
        transitions=np.zeros((num_labels, num_labels)),
        begin_transitions=np.zeros(num_labels),
        end_transitions=np.zeros(num_labels),
    )


def _state_scores(x: list[FeatureSet], model: CrfModel) -> np.ndarray:
    """S[t, y] = sum of state weights for the known features at position t."""
    scores = np.zeros((len(x), model.num_labels))
    index = model.feature_index
    weights = model.state_weights
    for t, feats in enumerate(x):
        rows = [index[f] for f in feats if f in index]
        if rows:
            scores[t] = weights[rows].sum(axis=0)
    return scores


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - m).sum(axis=axis)) + np.squeeze(m, axis=axis)
    return out


def sequence_score(x: list[FeatureSet], y: list[str], model: CrfModel) -> float:
    """Unnormalized log score of one labeling."""
    if len(x) != len(y):
        raise CrfError(f"{len(x)} positions but {len(y)} labels")
    yi = model.label_ids(y)
    scores = _state_scores(x, model)
    total = scores[np.arange(len(x)), yi].sum()
    total += model.begin_transitions[yi[0]] + model.end_transitions[yi[-1]]
    total += model.transitions[yi[:-1], yi[1:]].sum()
    return float(total)


def log_partition(x: list[FeatureSet], model: CrfModel) -> float:
    """log sum over all labelings of exp(sequence_score), by the forward recursion."""
    scores = _state_scores(x, model)
    alpha = model.begin_transitions + scores[0]
    for t in range(1, len(x)):
        alpha = _logsumexp(alpha[:, None] + model.transitions, axis=0) + scores[t]
    return float(_logsumexp(alpha + model.end_transitions, axis=0))


def _forward_backward(scores: np.ndarray, model: CrfModel):
    """Alphas, betas and log Z for one sentence's state score matrix."""
    T = scores.shape[0]
    trans = model.transitions
    alpha = np.empty_like(scores)
    beta = np.empty_like(scores)
    alpha[0] = model.begin_transitions + scores[0]
    for t in range(1, T):
        alpha[t] = _logsumexp(alpha[t - 1][:, None] + trans, axis=0) + scores[t]
    beta[T - 1] = model.end_transitions
    for t in range(T - 2, -1, -1):
        beta[t] = _logsumexp(trans + (scores[t + 1] + beta[t + 1])[None, :], axis=1)
    logz = float(_logsumexp(alpha[T - 1] + model.end_transitions, axis=0))
    return alpha, beta, logz


def posterior_marginals(x: list[FeatureSet], model: CrfModel) -> np.ndarray:
    """P(y_t = y | x) for every position; rows sum to 1."""
    scores = _state_scores(x, model)
    alpha, beta, logz = _forward_backward(scores, model)
    return np.exp(alpha + beta - logz)


@dataclass
class CrfGradient:
    state: np.ndarray
    transitions: np.ndarray
    begin: np.ndarray
    end: np.ndarray


def _intern(data, model: CrfModel):
    """Map (features, labels) pairs to index arrays against the model tables."""
    interned = []
    for x, y in data:
        fids = [np.array([model.feature_index[f] for f in feats if f in model.feature_index],
                         dtype=np.int64) for feats in x]
        interned.append((fids, model.label_ids(list(y))))
    return interned


def _sentence_terms(fids, yi, model: CrfModel, grad: CrfGradient) -> float:
    """Add one sentence's (logZ - score) gradient into ``grad``; return its nll."""
    T = len(fids)
    scores = np.zeros((T, model.num_labels))
    weights = model.state_weights
    for t, rows in enumerate(fids):
        if rows.size:
            scores[t] = weights[rows].sum(axis=0)
    alpha, beta, logz = _forward_backward(scores, model)
    unary = np.exp(alpha + beta - logz)

    # expected counts
    for t, rows in enumerate(fids):
        if rows.size:
            np.add.at(grad.state, rows, unary[t])
    grad.begin += unary[0]
    grad.end += unary[T - 1]
    if T > 1:
        trans = model.transitions
        for t in range(T - 1):
            pair = np.exp(alpha[t][:, None] + trans + (scores[t + 1] + beta[t + 1])[None, :] - logz)
            grad.transitions += pair

    # empirical counts
    for t, rows in enumerate(fids):
        if rows.size:
            np.subtract.at(grad.state, (rows, np.full(rows.size, yi[t])), 1.0)
    grad.begin[yi[0]] -= 1.0
    grad.end[yi[-1]] -= 1.0
    if T > 1:
        np.subtract.at(grad.transitions, (yi[:-1], yi[1:]), 1.0)

    score = scores[np.arange(T), yi].sum()
    score += model.begin_transitions[yi[0]] + model.end_transitions[yi[-1]]
    score += model.transitions[yi[:-1], yi[1:]].sum()
    return logz - float(score)


def nll_and_gradient(data, model: CrfModel, l2: float = 0.0) -> tuple[float, CrfGradient]:
    """Negative log-likelihood over (features, labels) pairs plus its gradient.

    The gradient is expected feature counts minus empirical counts, with the
    L2 term l2*w added on every weight class.
    """
    grad = CrfGradient(
        state=np.zeros_like(model.state_weights),
        transitions=np.zeros_like(model.transitions),
        begin=np.zeros_like(model.begin_transitions),
        end=np.zeros_like(model.end_transitions),
    )
    loss = 0.0
    for fids, yi in _intern(data, model):
        loss += _sentence_terms(fids, yi, model, grad)
    if l2 > 0.0:
        loss += 0.5 * l2 * (
            float((model.state_weights ** 2).sum())
            + float((model.transitions ** 2).sum())
            + float((model.begin_transitions ** 2).sum())
            + float((model.end_transitions ** 2).sum())
        )
        grad.state += l2 * model.state_weights
        grad.transitions += l2 * model.transitions
        grad.begin += l2 * model.begin_transitions
        grad.end += l2 * model.end_transitions
    return loss, grad


def viterbi_decode(x: list[FeatureSet], model: CrfModel) -> tuple[list[str], float]:
    """Best labeling by max-sum; ties resolve to the lower label index."""
    scores = _state_scores(x, model)
    T, Y = scores.shape
    delta = model.begin_transitions + scores[0]
    backptr = np.zeros((T, Y), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + model.transitions
        backptr[t] = cand.argmax(axis=0)
        delta = cand[backptr[t], np.arange(Y)] + scores[t]
    delta = delta + model.end_transitions
    best = int(delta.argmax())
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(backptr[t, best])
        path.append(best)
    path.reverse()
    return [model.labels[i] for i in path], float(delta.max())


def predict_sentence(sentence: Sentence, model: CrfModel) -> list[str]:
    tags, _ = viterbi_decode(sentence_features(sentence), model)
    return tags


def train(corpus: Corpus, config: CrfTrainConfig) -> tuple[CrfModel, list[float]]:
    """Full-batch AdamW on the regularized NLL; returns the model and loss trace.

    Weight decay inside AdamW is disabled because regularization already
    enters through the explicit L2 term of the objective.
    """
    if not corpus:
        raise CrfError("cannot train on an empty corpus")
    labels = sorted({tok.ner for s in corpus for tok in s.tokens})
    feature_index: dict[str, int] = {}
    data = []
    for sentence in corpus:
        feats = sentence_features(sentence)
        for fs in feats:
            for f in fs:
                if f not in feature_index:
                    feature_index[f] = len(feature_index)
        data.append((feats, sentence.ner_tags()))

    model = empty_model(labels, feature_index)
    params = [
        Tensor(model.state_weights, name="state_weights"),
        Tensor(model.transitions, name="transitions"),
        Tensor(model.begin_transitions, name="begin_transitions"),
        Tensor(model.end_transitions, name="end_transitions"),
    ]
    # Tensor construction copies via asarray only when dtype differs; re-point
    # the model at the tensor buffers so optimizer updates are visible.
    model.state_weights = params[0].data
    model.transitions = params[1].data
    model.begin_transitions = params[2].data
    model.end_transitions = params[3].data

    optimizer = AdamW(params, weight_decay=0.0)
    trace: list[float] = []
    for epoch in range(1, config.epochs + 1):
        loss, grad = nll_and_gradient(data, model, l2=config.l2)
        if not np.isfinite(loss):
            raise CrfError(f"training error: non-finite loss at epoch {epoch}")
        trace.append(loss)
        params[0].grad = grad.state
        params[1].grad = grad.transitions
        params[2].grad = grad.begin
        params[3].grad = grad.end
        optimizer.step(lr=config.lr)
    return model, trace


def top_transitions(model: CrfModel, k: int):
    """The k most positive and k most negative (from, to, weight) transitions."""
    total = model.num_labels ** 2
    if k > total:
        import warnings

        warnings.warn(f"k={k} exceeds {total} transitions; clamping", stacklevel=2)
        k = total
    entries = [
        (model.labels[i], model.labels[j], float(model.transitions[i, j]))
        for i in range(model.num_labels)
        for j in range(model.num_labels)
    ]
    by_weight = sorted(entries, key=lambda e: (-e[2], e[0], e[1]))
    likely = by_weight[:k]
    unlikely = sorted(entries, key=lambda e: (e[2], e[0], e[1]))[:k]
    return likely, unlikely
