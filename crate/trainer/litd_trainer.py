"""Trainer interface: configuration, the activation CSV reader and the weights
writer that `litd` loads. Training itself is not implemented here;
fixtures/generate.py trains the fixture networks.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

ARCH = "cnn28-conv5x5x5-pool-conv5x5x10-pool-fc128-fc10"
TENSORS = [
    ("conv1.weight", (5, 5, 5, 1)),
    ("conv1.bias", (5,)),
    ("conv2.weight", (10, 5, 5, 5)),
    ("conv2.bias", (10,)),
    ("fc1.weight", (128, 490)),
    ("fc1.bias", (128,)),
    ("fc2.weight", (10, 128)),
    ("fc2.bias", (10,)),
]


class UsageError(ValueError):
    pass


class Divergence(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 64
    learning_rate: float = 1e-3
    activation: str = "relu"  # relu | poly
    poly_csv: Optional[Path] = None
    seed: int = 7
    output: Path = Path("weights.bin")

    def validate(self):
        if self.epochs < 1:
            raise UsageError("epochs must be at least 1")
        if self.batch_size < 1:
            raise UsageError("batch size must be at least 1")
        if self.activation not in ("relu", "poly"):
            raise UsageError(f"unknown activation mode {self.activation!r}")
        if self.activation == "poly" and (self.poly_csv is None or not Path(self.poly_csv).is_file()):
            raise UsageError("poly mode needs the CSV written by `litd approx`")


def load_poly_csv(path):
    """Reads `degree,interval_lo,interval_hi,k,monomial_coeff` rows into
    (ascending coefficients, (lo, hi))."""
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise UsageError(f"{path}: no coefficient rows")
    degree = int(rows[0]["degree"])
    interval = (float(rows[0]["interval_lo"]), float(rows[0]["interval_hi"]))
    coeffs = [None] * (degree + 1)
    for r in rows:
        if int(r["degree"]) != degree or (float(r["interval_lo"]), float(r["interval_hi"])) != interval:
            raise UsageError(f"{path}: rows disagree on degree or interval")
        k = int(r["k"])
        if not 0 <= k <= degree or coeffs[k] is not None:
            raise UsageError(f"{path}: bad or repeated k={k}")
        coeffs[k] = float(r["monomial_coeff"])
    if any(c is None for c in coeffs):
        raise UsageError(f"{path}: missing coefficients")
    return coeffs, interval


def write_weights(path, tensors, activation, test_accuracy=None, scale_hint=None):
    """Writes the litd weights file. `tensors` maps the names in TENSORS to
    float64 numpy arrays already in litd layout (conv weights as
    filters, kh, kw, in_channels; fc1 inputs flattened over h, w, channel).
    `activation` is {"kind": "relu"} or {"kind": "poly", "coeffs": [...], "interval": [lo, hi]}."""
    import numpy as np

    for name, shape in TENSORS:
        if tuple(tensors[name].shape) != shape:
            raise UsageError(f"{name} has shape {tensors[name].shape}, expected {shape}")
    header = {
        "format": "litd-weights",
        "version": 1,
        "architecture": ARCH,
        "flatten_order": "hwc",
        "activation": activation,
        "tensors": [{"name": n, "shape": list(s)} for n, s in TENSORS],
    }
    if scale_hint is not None:
        header["scale_hint"] = {"input": scale_hint[0], "weight": scale_hint[1]}
    if test_accuracy is not None:
        header["training"] = {"test_accuracy": test_accuracy}
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode())
        f.write(b"\0")
        for name, _ in TENSORS:
            f.write(np.asarray(tensors[name], dtype="<f8").tobytes())


def train(config: TrainConfig):
    """Trains the network and returns {"test_accuracy": ...}. Raises
    Divergence when the loss becomes non-finite."""
    config.validate()
    raise NotImplementedError("training is outside this workspace; see fixtures/generate.py")
