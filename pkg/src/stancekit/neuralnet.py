"""Dense feedforward stance classifier, trained from scratch with numpy.

The first-stage network is the 1024-relu / 128-relu / 4-softmax stack;
minibatch backpropagation minimizes mean categorical cross-entropy with a
seeded shuffle each epoch. A second-stage model is created by ``transfer``:
it reuses every pre-softmax layer's weights verbatim and appends freshly
initialized layers, after which the whole stack stays trainable.

All randomness flows through ``numpy.random.default_rng`` seeds; identical
(data, config, seed) reproduce identical weights bit for bit in
single-threaded mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import N_CLASSES, Stance
from .errors import NetworkError, TrainingDivergedError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

GRADIENT_CHECK_MAX_UNITS = 64


@dataclass(frozen=True)
class LayerSpec:
    units: int
    activation: str  # "relu" | "softmax"


# Default first-stage architecture: 1024 relu, 128 relu, 4 softmax.
STAGE1_SPECS = (
    LayerSpec(1024, "relu"),
    LayerSpec(128, "relu"),
    LayerSpec(N_CLASSES, "softmax"),
)

# Default layers appended by ``transfer``.
TRANSFER_EXTRA_SPECS = (
    LayerSpec(128, "relu"),
    LayerSpec(N_CLASSES, "softmax"),
)


@dataclass
class NetworkModel:
    layer_specs: tuple[LayerSpec, ...]
    weights: list[np.ndarray]  # layer i: (dim_{i-1}, units_i)
    biases: list[np.ndarray]  # layer i: (units_i,)
    input_dim: int
    rng_seed: int

    def copy(self) -> "NetworkModel":
        return NetworkModel(
            layer_specs=self.layer_specs,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            input_dim=self.input_dim,
            rng_seed=self.rng_seed,
        )

    @property
    def n_layers(self) -> int:
        return len(self.layer_specs)


@dataclass
class TrainConfig:
    batch_size: int = 512
    epochs: int = 80
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # "adam" | "sgd"
    seed: int = 0
    class_weights: np.ndarray | None = None
    # Optional: stop after this many epochs without a training-loss improvement.
    early_stop_patience: int | None = None


@dataclass(frozen=True)
class EpochRecord:
    epoch: int  # 1-based
    loss: float
    accuracy: float


TrainHistory = list[EpochRecord]


def _validate_specs(specs, input_dim: int) -> None:
    if input_dim < 1:
        raise NetworkError(f"input_dim must be positive, got {input_dim}", code="bad-spec")
    if len(specs) == 0:
        raise NetworkError("need at least one layer", code="bad-spec")
    for i, spec in enumerate(specs):
        if spec.units < 1:
            raise NetworkError(f"layer {i} has zero units", code="bad-spec")
        if spec.activation not in ("relu", "softmax"):
            raise NetworkError(
                f"layer {i} has unknown activation {spec.activation!r}", code="bad-spec"
            )
        if spec.activation == "softmax" and i != len(specs) - 1:
            raise NetworkError(
                "softmax is only permitted on the final layer", code="bad-spec"
            )
    last = specs[-1]
    if last.activation != "softmax" or last.units != N_CLASSES:
        raise NetworkError(
            f"final layer must be a {N_CLASSES}-unit softmax, "
            f"got {last.units}-unit {last.activation}",
            code="bad-spec",
        )


def _init_layer(rng: np.random.Generator, fan_in: int, spec: LayerSpec) -> np.ndarray:
    if spec.activation == "relu":
        limit = np.sqrt(6.0 / fan_in)  # He uniform
    else:
        limit = np.sqrt(6.0 / (fan_in + spec.units))  # Glorot uniform
    return rng.uniform(-limit, limit, size=(fan_in, spec.units))


def build(input_dim: int, specs, seed: int) -> NetworkModel:
    """Initialize a network: He-uniform relu layers, Glorot-uniform softmax
    layer, zero biases. Deterministic for a given seed."""
    specs = tuple(specs)
    _validate_specs(specs, input_dim)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    fan_in = input_dim
    for spec in specs:
        weights.append(_init_layer(rng, fan_in, spec))
        biases.append(np.zeros(spec.units))
        fan_in = spec.units
    return NetworkModel(
        layer_specs=specs,
        weights=weights,
        biases=biases,
        input_dim=input_dim,
        rng_seed=seed,
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def _forward_batch(model: NetworkModel, x: np.ndarray):
    """Returns (pre-activations per layer, activations per layer incl. input)."""
    zs = []
    activations = [x]
    a = x
    for spec, w, b in zip(model.layer_specs, model.weights, model.biases):
        z = a @ w + b
        zs.append(z)
        a = _softmax(z) if spec.activation == "softmax" else np.maximum(z, 0.0)
        activations.append(a)
    return zs, activations


def forward(model: NetworkModel, x) -> np.ndarray:
    """Class probabilities for one input vector (softmax output)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise NetworkError(
            f"input shape {x.shape} does not match input_dim {model.input_dim}",
            code="dimension-mismatch",
        )
    if not np.all(np.isfinite(x)):
        raise NetworkError("non-finite input", code="non-finite-input")
    _, activations = _forward_batch(model, x[None, :])
    return activations[-1][0]


def forward_batch(model: NetworkModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch, one row per input."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise NetworkError(
            f"batch shape {x.shape} does not match input_dim {model.input_dim}",
            code="dimension-mismatch",
        )
    if not np.all(np.isfinite(x)):
        raise NetworkError("non-finite input", code="non-finite-input")
    _, activations = _forward_batch(model, x)
    return activations[-1]


def predict(model: NetworkModel, x) -> Stance:
    """Highest-probability stance; ties go to the lowest class index."""
    probs = forward(model, x)
    return Stance.from_index(int(np.argmax(probs)))


def predict_batch(model: NetworkModel, x: np.ndarray) -> list[Stance]:
    probs = forward_batch(model, x)
    return [Stance.from_index(int(i)) for i in np.argmax(probs, axis=1)]


def _label_indices(labels) -> np.ndarray:
    out = np.empty(len(labels), dtype=np.int64)
    for i, label in enumerate(labels):
        out[i] = label.index if isinstance(label, Stance) else int(label)
    if len(out) and (out.min() < 0 or out.max() >= N_CLASSES):
        raise NetworkError("label index out of range", code="bad-label")
    return out


def _sample_losses(z_final: np.ndarray, y_idx: np.ndarray) -> np.ndarray:
    log_p = _log_softmax(z_final)
    return -log_p[np.arange(z_final.shape[0]), y_idx]


def _backward_batch(model, zs, activations, y_idx, sample_weights):
    """Gradients of the weighted mean cross-entropy over the batch."""
    n = y_idx.shape[0]
    probs = activations[-1]
    delta = probs.copy()
    delta[np.arange(n), y_idx] -= 1.0
    delta *= sample_weights[:, None] / n
    grads_w = [None] * model.n_layers
    grads_b = [None] * model.n_layers
    for layer in range(model.n_layers - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (zs[layer - 1] > 0.0)
    return grads_w, grads_b


class _AdamState:
    def __init__(self, model: NetworkModel):
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]

    def step(self, model, grads_w, grads_b, lr):
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for i in range(model.n_layers):
            for param, grad, m, v in (
                (model.weights[i], grads_w[i], self.m_w[i], self.v_w[i]),
                (model.biases[i], grads_b[i], self.m_b[i], self.v_b[i]),
            ):
                m *= ADAM_BETA1
                m += (1.0 - ADAM_BETA1) * grad
                v *= ADAM_BETA2
                v += (1.0 - ADAM_BETA2) * grad**2
                param -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def _sgd_step(model, grads_w, grads_b, lr):
    for i in range(model.n_layers):
        model.weights[i] -= lr * grads_w[i]
        model.biases[i] -= lr * grads_b[i]


def _check_finite(model, epoch, batch):
    for i in range(model.n_layers):
        if not (np.all(np.isfinite(model.weights[i])) and np.all(np.isfinite(model.biases[i]))):
            raise TrainingDivergedError(
                f"non-finite weights in layer {i} after epoch {epoch} batch {batch}; "
                "try a lower learning rate",
                code="diverged",
            )


def train(model: NetworkModel, features, labels, cfg: TrainConfig, on_epoch=None):
    """Minibatch cross-entropy training; returns (trained model, history).

    The input model is not mutated. History carries one (loss, accuracy)
    record per completed epoch; loss and accuracy are running training-set
    values gathered from each batch's forward pass before its update.
    ``on_epoch``, when given, is called with each record as it is appended.
    """
    x = np.asarray(features, dtype=np.float64)
    y_idx = _label_indices(labels)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise NetworkError(
            f"feature matrix shape {x.shape} does not match input_dim "
            f"{model.input_dim}",
            code="dimension-mismatch",
        )
    if x.shape[0] == 0:
        raise NetworkError("empty training set", code="empty-dataset")
    if x.shape[0] != y_idx.shape[0]:
        raise NetworkError(
            f"{x.shape[0]} feature rows vs {y_idx.shape[0]} labels",
            code="length-mismatch",
        )
    if not np.all(np.isfinite(x)):
        raise NetworkError("non-finite features", code="non-finite-input")
    if cfg.batch_size < 1:
        raise NetworkError("batch_size must be positive", code="bad-config")
    if cfg.optimizer not in ("adam", "sgd"):
        raise NetworkError(f"unknown optimizer {cfg.optimizer!r}", code="bad-config")
    if cfg.class_weights is not None:
        cw = np.asarray(cfg.class_weights, dtype=np.float64)
        if cw.shape != (N_CLASSES,) or np.any(cw <= 0) or not np.all(np.isfinite(cw)):
            raise NetworkError(
                f"class_weights must be {N_CLASSES} positive reals", code="bad-config"
            )
        sample_weights_all = cw[y_idx]
    else:
        sample_weights_all = np.ones(x.shape[0])

    out = model.copy()
    history: list[EpochRecord] = []
    if cfg.epochs == 0:
        return out, history

    rng = np.random.default_rng(cfg.seed)
    adam = _AdamState(out) if cfg.optimizer == "adam" else None
    n = x.shape[0]
    best_loss = np.inf
    stall = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for batch_no, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start : start + cfg.batch_size]
            xb, yb, wb = x[idx], y_idx[idx], sample_weights_all[idx]
            zs, activations = _forward_batch(out, xb)
            batch_losses = _sample_losses(zs[-1], yb) * wb
            batch_loss = float(batch_losses.sum())
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch} batch {batch_no}",
                    code="diverged",
                )
            loss_sum += batch_loss
            correct += int(np.sum(np.argmax(activations[-1], axis=1) == yb))
            grads_w, grads_b = _backward_batch(out, zs, activations, yb, wb)
            if adam is not None:
                adam.step(out, grads_w, grads_b, cfg.learning_rate)
            else:
                _sgd_step(out, grads_w, grads_b, cfg.learning_rate)
            _check_finite(out, epoch, batch_no)
        epoch_loss = loss_sum / n
        history.append(EpochRecord(epoch=epoch + 1, loss=epoch_loss, accuracy=correct / n))
        if on_epoch is not None:
            on_epoch(history[-1])
        if cfg.early_stop_patience is not None:
            if epoch_loss < best_loss:
                best_loss = epoch_loss
                stall = 0
            else:
                stall += 1
                if stall >= cfg.early_stop_patience:
                    break
    return out, history


def gradient_check(model: NetworkModel, x, y) -> float:
    """Max relative disagreement between backprop and central differences.

    Only for small models (at most 64 total units). Near-zero gradient
    pairs are compared absolutely instead of relatively. Coordinates whose
    perturbation flips a relu gate are skipped: the loss has a kink inside
    the difference interval there, so central differences do not estimate
    the one-sided derivative backprop reports.
    """
    total_units = sum(s.units for s in model.layer_specs)
    if total_units > GRADIENT_CHECK_MAX_UNITS:
        raise NetworkError(
            f"gradient_check is limited to {GRADIENT_CHECK_MAX_UNITS} total units, "
            f"model has {total_units}",
            code="model-too-large",
        )
    x = np.asarray(x, dtype=np.float64)[None, :]
    y_idx = _label_indices([y])
    ones = np.ones(1)

    work = model.copy()
    zs, activations = _forward_batch(work, x)
    grads_w, grads_b = _backward_batch(work, zs, activations, y_idx, ones)

    def loss_and_gates() -> tuple[float, tuple[bytes, ...]]:
        zs_now, _ = _forward_batch(work, x)
        gates = tuple((z > 0.0).tobytes() for z in zs_now[:-1])
        return float(_sample_losses(zs_now[-1], y_idx)[0]), gates

    h = 1e-5
    worst = 0.0
    for params, grads in ((work.weights, grads_w), (work.biases, grads_b)):
        for tensor, grad in zip(params, grads):
            flat = tensor.reshape(-1)
            gflat = grad.reshape(-1)
            for j in range(flat.shape[0]):
                orig = flat[j]
                flat[j] = orig + h
                up, gates_up = loss_and_gates()
                flat[j] = orig - h
                down, gates_down = loss_and_gates()
                flat[j] = orig
                if gates_up != gates_down:
                    continue
                numeric = (up - down) / (2.0 * h)
                analytic = gflat[j]
                denom = max(abs(numeric), abs(analytic))
                if denom < 1e-8:
                    err = abs(numeric - analytic)
                else:
                    err = abs(numeric - analytic) / denom
                worst = max(worst, err)
    return worst


def transfer(trained: NetworkModel, extra=None, seed: int = 0) -> NetworkModel:
    """Second-stage model: copy every pre-softmax layer of ``trained``
    verbatim, then append freshly initialized ``extra`` layers (default one
    128-unit relu plus a new 4-unit softmax). Copied layers stay trainable.
    """
    if extra is None:
        extra = TRANSFER_EXTRA_SPECS
    extra = tuple(extra)
    _validate_specs(trained.layer_specs, trained.input_dim)
    fan_in = trained.input_dim
    for i, spec in enumerate(trained.layer_specs):
        w = trained.weights[i]
        if w.shape != (fan_in, spec.units):
            raise NetworkError(
                f"layer {i} weights have shape {w.shape}, expected "
                f"({fan_in}, {spec.units})",
                code="architecture-mismatch",
            )
        fan_in = spec.units
    kept_specs = trained.layer_specs[:-1]
    if not kept_specs:
        raise NetworkError(
            "source model has no pre-softmax layers to transfer",
            code="architecture-mismatch",
        )
    new_specs = kept_specs + extra
    _validate_specs(new_specs, trained.input_dim)
    rng = np.random.default_rng(seed)
    weights = [trained.weights[i].copy() for i in range(len(kept_specs))]
    biases = [trained.biases[i].copy() for i in range(len(kept_specs))]
    fan_in = kept_specs[-1].units
    for spec in extra:
        weights.append(_init_layer(rng, fan_in, spec))
        biases.append(np.zeros(spec.units))
        fan_in = spec.units
    return NetworkModel(
        layer_specs=new_specs,
        weights=weights,
        biases=biases,
        input_dim=trained.input_dim,
        rng_seed=seed,
    )
