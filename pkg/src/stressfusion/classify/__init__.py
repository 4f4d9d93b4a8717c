"""Trainable classifiers: sigmoid MLP, RBF-kernel SVM and Gaussian naive Bayes.

All three z-score their inputs with statistics from the training rows only.
"""
from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from ..data_model import ClassLabel, LabeledDataset, Scheme
from ..errors import ConfigError, TrainingError
from ..seeding import derive_seed, make_rng  # noqa: F401  (re-exported)
from . import mlp as _mlp
from . import svm as _svm

KINDS = ("mlp", "svm", "nb")
FORMAT_VERSION = 1
# Lanes per kernel call; larger batches fall out of cache and train slower.
MAX_LANES = 64


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier kind plus its hyper-parameters.

    Only the fields relevant to ``kind`` are used.
    """

    kind: str = "mlp"
    hidden_layers: tuple[int, ...] = (16, 16, 8, 8)
    learning_rate: float = 0.3
    momentum: float = 0.2
    epochs: int = 500
    loss: str = "squared"
    seed: int = 0
    gamma: float = 0.01
    C: float = 10.0
    tolerance: float = 1e-3
    max_passes: int = 10
    variance_floor: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier kind {self.kind!r}")
        if self.kind == "mlp":
            if self.learning_rate <= 0:
                raise ConfigError("MLP learning_rate must be > 0")
            if self.epochs < 0 or any(h < 1 for h in self.hidden_layers):
                raise ConfigError("MLP epochs must be >= 0 and hidden layers >= 1 unit")
            if self.loss not in _mlp.LOSSES:
                raise ConfigError(f"unknown MLP loss {self.loss!r}")
        if self.kind == "svm" and (self.gamma <= 0 or self.C <= 0):
            raise ConfigError("SVM gamma and C must be > 0")
        if self.variance_floor < 0:
            raise ConfigError("variance_floor must be >= 0")

    @property
    def stochastic(self) -> bool:
        return self.kind == "mlp"

    def with_seed(self, seed: int) -> "ClassifierSpec":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d


@dataclass(frozen=True, eq=False)
class TrainedModel:
    spec: ClassifierSpec
    n_classes: int
    feature_names: tuple[str, ...]
    center: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    params: dict = field(repr=False)
    scheme: Scheme | None = None

    def standardize(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.center.shape[0]:
            raise ConfigError(f"expected {self.center.shape[0]} features, got {X.shape[1]}")
        Z = (X - self.center) / self.scale
        Z[:, self.constant] = 0.0
        return Z


def _standardizer(X: np.ndarray):
    center = X.mean(axis=0)
    sd = X.std(axis=0)
    constant = sd == 0
    if constant.any():
        warnings.warn(f"{int(constant.sum())} constant feature(s) standardized to 0")
    scale = np.where(constant, 1.0, sd)
    return center, scale, constant


def _check_training(X, y, n_classes):
    if X.ndim != 2 or X.shape[1] < 1:
        raise TrainingError("need at least one feature")
    if np.unique(y).size < 2:
        raise TrainingError("training data contains a single class")
    if y.min() < 0 or y.max() >= n_classes:
        raise TrainingError("label index out of range")


def _fit_nb(spec, Z, y, n_classes):
    means = np.zeros((n_classes, Z.shape[1]))
    variances = np.ones((n_classes, Z.shape[1]))
    priors = np.zeros(n_classes)
    for c in range(n_classes):
        rows = Z[y == c]
        priors[c] = rows.shape[0] / Z.shape[0]
        if rows.shape[0]:
            means[c] = rows.mean(axis=0)
            variances[c] = np.maximum(rows.var(axis=0), spec.variance_floor)
    return {"priors": priors, "means": means, "variances": variances}


def _nb_log_joint(params, Z):
    with np.errstate(divide="ignore"):
        log_prior = np.log(params["priors"])
    var = params["variances"]
    ll = -0.5 * (np.log(2 * np.pi * var)[None, :, :]
                 + (Z[:, None, :] - params["means"][None, :, :]) ** 2 / var[None, :, :]).sum(axis=2)
    return ll + log_prior[None, :]


def _svm_pairs(n_classes):
    return [(a, b) for a in range(n_classes) for b in range(a + 1, n_classes)]


def _fit_svm(spec, Z, y, n_classes):
    machines = []
    present = set(np.unique(y).tolist())
    max_iter = max(10_000, 1000 * spec.max_passes * Z.shape[0])
    for a, b in _svm_pairs(n_classes):
        if a not in present or b not in present:
            machines.append(None)
            continue
        rows = (y == a) | (y == b)
        y_pm = np.where(y[rows] == b, 1.0, -1.0)
        m = _svm.fit_binary(Z[rows], y_pm, spec.gamma, spec.C, spec.tolerance, max_iter)
        m["pair"] = (a, b)
        machines.append(m)
    return {"machines": machines}


def _svm_scores(spec, params, Z, n_classes):
    if n_classes == 2 and params["machines"][0] is not None:
        f = _svm.decision(params["machines"][0], Z, spec.gamma)
        return np.stack([-f, f], axis=1)
    votes = np.zeros((Z.shape[0], n_classes))
    for m in params["machines"]:
        if m is None:
            continue
        a, b = m["pair"]
        f = _svm.decision(m, Z, spec.gamma)
        votes[:, b] += f > 0
        votes[:, a] += f <= 0
    return votes


def _mlp_setup(spec, Z, y, n_classes, seed):
    layout = _mlp.Layout.build((Z.shape[1], *spec.hidden_layers, n_classes))
    rng = make_rng(seed)
    params = _mlp.init_params(layout, rng)
    order = np.stack([rng.permutation(Z.shape[0]) for _ in range(spec.epochs)]) if spec.epochs \
        else np.zeros((0, Z.shape[0]), dtype=np.int64)
    Y = np.eye(n_classes)[y]
    return layout, params, order, Y


def _fit_mlp_lanes(spec, Zs, ys, n_classes, seeds):
    """Train one network per (Z, y, seed) triple in a single kernel call.

    All training sets must share their shape.
    """
    setups = [_mlp_setup(spec, Z, y, n_classes, s) for Z, y, s in zip(Zs, ys, seeds)]
    layout = setups[0][0]
    params = np.stack([s[1] for s in setups], axis=-1)
    X = np.stack(Zs, axis=-1)
    Y = np.stack([s[3] for s in setups], axis=-1)
    order = np.stack([s[2] for s in setups], axis=-1)
    trained = _mlp.train_networks(layout, params, X, Y, order, spec.learning_rate, spec.momentum,
                                  _mlp.LOSSES[spec.loss])
    return [{"layer_sizes": layout.sizes.tolist(), "weights": trained[:, f].copy()}
            for f in range(trained.shape[1])]


def _mlp_scores(params, Z):
    layout = _mlp.Layout.build(params["layer_sizes"])
    return _mlp.predict_outputs(np.ascontiguousarray(params["weights"]), np.ascontiguousarray(Z),
                                layout.sizes, layout.w_off, layout.b_off, layout.a_off)


def fit(spec: ClassifierSpec, X, y, n_classes: int, feature_names=None, scheme=None) -> TrainedModel:
    """Train on a raw feature matrix and integer class labels."""
    return fit_many(spec, [X], [y], n_classes, [spec.seed], feature_names, scheme)[0]


def fit_many(spec: ClassifierSpec, Xs: Sequence, ys: Sequence, n_classes: int,
             seeds: Sequence[int], feature_names=None, scheme=None, threads: int = 1) -> list[TrainedModel]:
    """Train several independent models of the same kind.

    MLPs whose training sets have equal shape are trained together in one
    batched kernel call; results equal training each model on its own.
    """
    Xs = [np.asarray(X, dtype=float) for X in Xs]
    ys = [np.asarray(y, dtype=np.int64) for y in ys]
    names = tuple(feature_names) if feature_names is not None else \
        tuple(f"x{i}" for i in range(Xs[0].shape[1]))
    prepared = []
    for X, y in zip(Xs, ys):
        _check_training(X, y, n_classes)
        center, scale, constant = _standardizer(X)
        Z = (X - center) / scale
        Z[:, constant] = 0.0
        prepared.append((Z, y, center, scale, constant))
    if spec.kind == "mlp":
        params = [None] * len(prepared)
        groups: dict = {}
        for i, (Z, *_rest) in enumerate(prepared):
            groups.setdefault(Z.shape, []).append(i)
        jobs = []
        for idx in groups.values():
            n_chunks = max(threads, -(-len(idx) // MAX_LANES))
            chunks = np.array_split(np.array(idx), max(1, min(n_chunks, len(idx))))
            jobs.extend(c.tolist() for c in chunks if len(c))

        def run(chunk):
            return chunk, _fit_mlp_lanes(spec, [prepared[i][0] for i in chunk],
                                         [prepared[i][1] for i in chunk], n_classes,
                                         [seeds[i] for i in chunk])

        if threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(threads) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        for chunk, ps in results:
            for i, p in zip(chunk, ps):
                params[i] = p
    elif spec.kind == "svm":
        params = [_fit_svm(spec, Z, y, n_classes) for Z, y, *_ in prepared]
    else:
        params = [_fit_nb(spec, Z, y, n_classes) for Z, y, *_ in prepared]
    return [TrainedModel(spec.with_seed(s), n_classes, names, c, sc, const, p, scheme)
            for (Z, y, c, sc, const), p, s in zip(prepared, params, seeds)]


def train(spec: ClassifierSpec, data: LabeledDataset) -> TrainedModel:
    return fit(spec, data.features, data.labels, data.scheme.n_classes, data.feature_names, data.scheme)


def decision_scores(model: TrainedModel, X) -> np.ndarray:
    """Per-class scores ``(n, n_classes)``; the prediction is their argmax.

    NB returns posterior probabilities, MLP output activations, binary SVM
    ``(-f, f)`` and multiclass SVM one-vs-one vote counts.
    """
    Z = model.standardize(X)
    kind = model.spec.kind
    if kind == "nb":
        joint = _nb_log_joint(model.params, Z)
        joint -= joint.max(axis=1, keepdims=True)
        p = np.exp(joint)
        return p / p.sum(axis=1, keepdims=True)
    if kind == "svm":
        return _svm_scores(model.spec, model.params, Z, model.n_classes)
    return _mlp_scores(model.params, Z)


def predict_indices(model: TrainedModel, X) -> np.ndarray:
    return np.argmax(decision_scores(model, X), axis=1)


def predict(model: TrainedModel, x, feature_names=None):
    """Classify one sample; returns ``(label, scores)``.

    ``x`` may be a :class:`~stressfusion.features.FeatureVector`, in which case
    its names must match the model's.
    """
    names = getattr(x, "names", feature_names)
    values = getattr(x, "values", x)
    if names is not None and tuple(names) != model.feature_names:
        raise ConfigError("feature names do not match the model")
    values = np.asarray(values, dtype=float).reshape(1, -1)
    scores = decision_scores(model, values)[0]
    idx = int(np.argmax(scores))
    label = ClassLabel.from_index(model.scheme, idx) if model.scheme is not None else idx
    return label, scores


def mlp_layout(model: TrainedModel) -> _mlp.Layout:
    return _mlp.Layout.build(model.params["layer_sizes"])


def mlp_gradient(layout: _mlp.Layout, params, Z, Y, loss: str = "squared") -> np.ndarray:
    """Backpropagated gradient of the summed loss w.r.t. the flat parameters."""
    return _mlp.summed_gradient(np.ascontiguousarray(params, dtype=float), np.ascontiguousarray(Z, dtype=float),
                                np.ascontiguousarray(Y, dtype=float), layout.sizes, layout.w_off,
                                layout.b_off, layout.a_off, _mlp.LOSSES[loss])


def gradient_check(spec: ClassifierSpec, X, y, n_classes: int | None = None, step: float = 1e-5,
                   params=None) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    The network is freshly initialized from ``spec.seed`` unless ``params``
    is given. Relative error is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n_classes = n_classes or int(y.max()) + 1
    layout = _mlp.Layout.build((X.shape[1], *spec.hidden_layers, n_classes))
    if params is None:
        params = _mlp.init_params(layout, make_rng(spec.seed))
    params = np.asarray(params, dtype=float)
    Y = np.eye(n_classes)[y]
    code = _mlp.LOSSES[spec.loss]
    analytic = mlp_gradient(layout, params, X, Y, spec.loss)
    numeric = np.empty_like(analytic)
    # extended precision keeps rounding noise well below the tolerance on tiny components
    wide = params.astype(np.longdouble)
    for p in range(params.shape[0]):
        hi = wide.copy()
        lo = wide.copy()
        hi[p] += step
        lo[p] -= step
        diff = (_mlp.loss_numpy(layout, hi, X, Y, code, np.longdouble)
                - _mlp.loss_numpy(layout, lo, X, Y, code, np.longdouble))
        numeric[p] = float(diff / (2 * step))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


# -- serialization -----------------------------------------------------------

def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"]).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_json(model: TrainedModel) -> str:
    doc = {
        "format": "stressfusion-model",
        "version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "n_classes": model.n_classes,
        "scheme": model.scheme.value if model.scheme else None,
        "feature_names": list(model.feature_names),
        "center": _encode(model.center),
        "scale": _encode(model.scale),
        "constant": _encode(model.constant),
        "params": _encode(model.params),
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format") != "stressfusion-model" or doc.get("version") != FORMAT_VERSION:
        raise ConfigError("not a supported model file")
    params = _decode(doc["params"])
    if "machines" in params:
        for m in params["machines"]:
            if m is not None:
                m["pair"] = tuple(m["pair"])
    return TrainedModel(ClassifierSpec(**doc["spec"]), doc["n_classes"], tuple(doc["feature_names"]),
                        _decode(doc["center"]), _decode(doc["scale"]), _decode(doc["constant"]), params,
                        Scheme(doc["scheme"]) if doc["scheme"] else None)


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())
