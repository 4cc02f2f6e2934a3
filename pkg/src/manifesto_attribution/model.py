"""Classifier backends: softmax regression (mini-batch gradient descent) and multinomial naive Bayes.

Both backends map a :class:`FeatureVector` to a full probability distribution
over the label set.  :class:`Classifier` bundles a backend with the feature
configuration and vocabulary so it can score raw paragraphs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, Paragraph, PartyLabel, check_labels
from .errors import PreconditionError, StructuralError, TrainingDivergedError
from .features import FeatureConfig, FeatureVector, Vocabulary, build_vocabulary, to_matrix, vectorize

log = logging.getLogger(__name__)

REST_LABEL = "Rest"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    l2_lambda: float = 1e-4
    seed: int = 0
    early_stop_patience: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise PreconditionError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise PreconditionError("epochs and batch_size must be positive")
        if self.l2_lambda < 0 or self.early_stop_patience < 0:
            raise PreconditionError("l2_lambda and early_stop_patience must be non-negative")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "l2_lambda": self.l2_lambda,
            "seed": self.seed,
            "early_stop_patience": self.early_stop_patience,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TrainConfig":
        return cls(**{k: data[k] for k in cls().to_dict() if k in data})


@dataclass(frozen=True)
class PredictedDistribution:
    probabilities: tuple[float, ...]
    argmax_label: PartyLabel
    max_prob: float


@dataclass(frozen=True, eq=False)
class SoftmaxModel:
    """Linear softmax classifier: ``p = softmax(W x + b)``."""

    weights: np.ndarray  # (K, V)
    bias: np.ndarray  # (K,)
    labels: tuple[PartyLabel, ...]
    loss_history: tuple[float, ...] = ()
    backend = "softmax"

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        check_labels(self.labels)
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],) or w.shape[0] != len(self.labels):
            raise StructuralError(f"weights {w.shape} / bias {b.shape} do not match {len(self.labels)} labels")
        if len(self.labels) < 2:
            raise StructuralError("a classifier needs at least two labels")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise StructuralError("model parameters must be finite")
        w.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, labels: Sequence[PartyLabel], n_features: int) -> "SoftmaxModel":
        return cls(np.zeros((len(labels), n_features)), np.zeros(len(labels)), tuple(labels))

    def log_scores(self, x: FeatureVector) -> np.ndarray:
        _check_dim(x, self.n_features)
        idx = list(x.indices)
        return self.weights[:, idx] @ np.asarray(x.weights) + self.bias


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    """Multinomial naive Bayes over (possibly fractional) feature weights."""

    log_prior: np.ndarray  # (K,)
    log_likelihood: np.ndarray  # (K, V)
    labels: tuple[PartyLabel, ...]
    alpha: float = 1.0
    backend = "nb"

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        check_labels(self.labels)
        lp = np.asarray(self.log_prior, dtype=np.float64)
        ll = np.asarray(self.log_likelihood, dtype=np.float64)
        if ll.ndim != 2 or lp.shape != (ll.shape[0],) or ll.shape[0] != len(self.labels):
            raise StructuralError(f"log_prior {lp.shape} / log_likelihood {ll.shape} do not match labels")
        lp.flags.writeable = False
        ll.flags.writeable = False
        object.__setattr__(self, "log_prior", lp)
        object.__setattr__(self, "log_likelihood", ll)

    @property
    def n_features(self) -> int:
        return self.log_likelihood.shape[1]

    def log_scores(self, x: FeatureVector) -> np.ndarray:
        _check_dim(x, self.n_features)
        idx = list(x.indices)
        return self.log_likelihood[:, idx] @ np.asarray(x.weights) + self.log_prior


class TransformerBackend:
    """Slot for an external pretrained-transformer backend.

    A conforming implementation exposes ``labels``, ``n_features`` and
    ``log_scores(vector)`` like the other backends.  Not provided here.
    """

    backend = "transformer"

    def __init__(self, *args, **kwargs):
        raise NotImplementedError("no transformer backend is bundled; plug in an adapter with the same interface")


Backend = Union[SoftmaxModel, NaiveBayesModel]


def _check_dim(x: FeatureVector, n_features: int) -> None:
    if x.indices and (x.indices[-1] >= n_features or x.indices[0] < 0):
        raise StructuralError(f"feature index {x.indices[-1]} out of range for {n_features} features")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def predict_distribution(model: Backend, vector: FeatureVector) -> PredictedDistribution:
    """Full label distribution for one vector; ties go to the lowest label id."""
    p = softmax(model.log_scores(vector))
    k = int(np.argmax(p))
    return PredictedDistribution(tuple(float(v) for v in p), model.labels[k], float(p[k]))


# -- softmax objective -----------------------------------------------------


def _label_ids(labels: Sequence) -> np.ndarray:
    return np.fromiter((lab.id if isinstance(lab, PartyLabel) else int(lab) for lab in labels), dtype=np.int64)


def objective(weights: np.ndarray, bias: np.ndarray, X: sp.csr_matrix, y: np.ndarray, l2_lambda: float):
    """Mean cross-entropy plus ``(l2_lambda / 2) * ||W||^2`` and its exact gradient.

    Returns ``(loss, grad_W, grad_b)``.  The bias is not regularized.
    """
    if X.shape[1] != weights.shape[1]:
        raise StructuralError(f"batch has {X.shape[1]} features, model has {weights.shape[1]}")
    n = X.shape[0]
    if n == 0:
        raise PreconditionError("empty batch")
    k = weights.shape[0]
    if y.size and (y.min() < 0 or y.max() >= k):
        raise StructuralError(f"label id out of range for {k} classes")
    z = np.asarray(X @ weights.T) + bias
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    nll = log_norm - z[rows, y]
    loss = float(nll.mean()) + 0.5 * l2_lambda * float(np.sum(weights * weights))
    delta = np.exp(z - log_norm[:, None])
    delta[rows, y] -= 1.0
    delta /= n
    grad_w = np.asarray(X.T @ delta).T + l2_lambda * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def loss_and_gradient(model: SoftmaxModel, batch: Sequence[tuple[FeatureVector, PartyLabel]], l2_lambda: float):
    """Loss and gradients of ``model`` on ``batch``; see :func:`objective`."""
    if not batch:
        raise PreconditionError("empty batch")
    vectors, labels = zip(*batch)
    for v in vectors:
        _check_dim(v, model.n_features)
    X = to_matrix(vectors, model.n_features)
    return objective(model.weights, model.bias, X, _label_ids(labels), l2_lambda)


def _check_training_labels(labels: Sequence[PartyLabel], y: np.ndarray) -> None:
    if len(labels) < 2:
        raise PreconditionError("training needs at least two classes")
    counts = np.bincount(y, minlength=len(labels))
    missing = [labels[i].name for i in np.flatnonzero(counts == 0)]
    if missing:
        raise PreconditionError(f"classes without training examples: {missing}")


def train_softmax(
    examples: Sequence[tuple[FeatureVector, PartyLabel]],
    labels: Sequence[PartyLabel],
    n_features: int,
    config: TrainConfig = TrainConfig(),
    validation: Sequence[tuple[FeatureVector, PartyLabel]] | None = None,
) -> SoftmaxModel:
    """Fit softmax regression by mini-batch gradient descent from zero weights.

    Examples are reshuffled each epoch from a generator seeded with
    ``config.seed``, so the result is reproducible bit for bit.  With a
    validation set and ``early_stop_patience > 0`` training stops after that
    many epochs without improvement and returns the best parameters seen.
    """
    labels = tuple(labels)
    if not examples:
        raise PreconditionError("no training examples")
    vectors, ys = zip(*examples)
    X = to_matrix(vectors, n_features)
    y = _label_ids(ys)
    _check_training_labels(labels, y)
    if validation:
        vv, vy = zip(*validation)
        Xv, yv = to_matrix(vv, n_features), _label_ids(vy)
    use_early_stop = bool(validation) and config.early_stop_patience > 0

    W = np.zeros((len(labels), n_features))
    b = np.zeros(len(labels))
    rng = np.random.default_rng(config.seed)
    n = X.shape[0]
    history = [objective(W, b, X, y, config.l2_lambda)[0]]
    best = (math.inf, W.copy(), b.copy(), len(history))
    stale = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        # Overflow surfaces below as a non-finite loss.
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, config.batch_size):
                sel = order[start : start + config.batch_size]
                _, gw, gb = objective(W, b, X[sel], y[sel], config.l2_lambda)
                W -= config.learning_rate * gw
                b -= config.learning_rate * gb
            loss = objective(W, b, X, y, config.l2_lambda)[0]
        if not math.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        history.append(loss)
        if use_early_stop:
            vloss = objective(W, b, Xv, yv, 0.0)[0]
            if vloss < best[0]:
                best, stale = (vloss, W.copy(), b.copy(), len(history)), 0
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    log.info("early stop at epoch %d (best validation loss %.6f)", epoch, best[0])
                    break
    if use_early_stop:
        _, W, b, keep = best
        history = history[:keep]
    return SoftmaxModel(W, b, labels, tuple(history))


def train_naive_bayes(
    examples: Sequence[tuple[FeatureVector, PartyLabel]],
    labels: Sequence[PartyLabel],
    n_features: int,
    alpha: float = 1.0,
) -> NaiveBayesModel:
    """Closed-form multinomial naive Bayes with additive smoothing ``alpha``."""
    if not alpha > 0:
        raise PreconditionError(f"alpha must be positive, got {alpha}")
    labels = tuple(labels)
    if not examples:
        raise PreconditionError("no training examples")
    vectors, ys = zip(*examples)
    X = to_matrix(vectors, n_features)
    y = _label_ids(ys)
    _check_training_labels(labels, y)
    k = len(labels)
    class_counts = np.bincount(y, minlength=k).astype(np.float64)
    onehot = sp.csr_matrix((np.ones(len(y)), (y, np.arange(len(y)))), shape=(k, len(y)))
    term_counts = np.asarray((onehot @ X).todense()) + alpha
    log_likelihood = np.log(term_counts) - np.log(term_counts.sum(axis=1, keepdims=True))
    log_prior = np.log(class_counts) - np.log(class_counts.sum())
    return NaiveBayesModel(log_prior, log_likelihood, labels, alpha)


# -- text-level classifier ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class Classifier:
    """A trained backend plus the featurization needed to score raw text."""

    model: Backend
    feature_config: FeatureConfig
    vocabulary: Vocabulary
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.model.n_features != len(self.vocabulary):
            raise StructuralError(
                f"model has {self.model.n_features} features, vocabulary has {len(self.vocabulary)} terms"
            )

    @property
    def labels(self) -> tuple[PartyLabel, ...]:
        return self.model.labels

    @property
    def backend(self) -> str:
        return self.model.backend

    def featurize(self, paragraph: Paragraph | str) -> FeatureVector:
        return vectorize(paragraph, self.vocabulary, self.feature_config)

    def predict(self, paragraph: Paragraph | str) -> PredictedDistribution:
        return predict_distribution(self.model, self.featurize(paragraph))


def fit_classifier(
    corpus: Corpus,
    feature_config: FeatureConfig = FeatureConfig(),
    train_config: TrainConfig = TrainConfig(),
    backend: str = "softmax",
    alpha: float = 1.0,
    validation: Corpus | None = None,
) -> Classifier:
    """Build the vocabulary on ``corpus`` (the training split) and fit a backend."""
    if len(corpus) == 0:
        raise PreconditionError("empty training corpus")
    vocab = build_vocabulary([p for p, _ in corpus.examples], feature_config)
    data = [(vectorize(p, vocab, feature_config), lab) for p, lab in corpus.examples]
    if backend == "softmax":
        val = None
        if validation is not None and len(validation):
            val = [(vectorize(p, vocab, feature_config), lab) for p, lab in validation.examples]
        model: Backend = train_softmax(data, corpus.labels, len(vocab), train_config, val)
    elif backend == "nb":
        model = train_naive_bayes(data, corpus.labels, len(vocab), alpha)
    else:
        raise PreconditionError(f"unknown backend {backend!r}; expected 'softmax' or 'nb'")
    return Classifier(model, feature_config, vocab)


def one_vs_rest_corpus(corpus: Corpus, focus: PartyLabel | str) -> Corpus:
    """Relabel ``corpus`` as {focus (id 0), rest (id 1)}."""
    name = focus.name if isinstance(focus, PartyLabel) else focus
    target = corpus.label_by_name(name)
    counts = corpus.class_counts()
    if counts[target.id] == 0:
        raise PreconditionError(f"focus party {name!r} has no examples")
    if sum(counts) - counts[target.id] == 0:
        raise PreconditionError(f"one-vs-rest for {name!r} needs at least one non-focus example")
    pos, rest = PartyLabel(0, name), PartyLabel(1, REST_LABEL if name != REST_LABEL else "Other")
    return Corpus((pos, rest), tuple((p, pos if lab == target else rest) for p, lab in corpus.examples))


def train_one_vs_rest(
    corpus: Corpus,
    focus: PartyLabel | str,
    config: TrainConfig = TrainConfig(),
    feature_config: FeatureConfig = FeatureConfig(),
) -> Classifier:
    """Binary softmax classifier separating ``focus`` from every other party."""
    return fit_classifier(one_vs_rest_corpus(corpus, focus), feature_config, config, "softmax")


def with_metadata(clf: Classifier, **meta) -> Classifier:
    return replace(clf, metadata={**clf.metadata, **meta})
