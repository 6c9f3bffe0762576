"""Regenerates the fixture set: synthetic 28x28 digits, two trained weight
files in the litd weights format, and golden float64 logits.

    python3 fixtures/generate.py            # writes into fixtures/
"""

import json
import math
import struct
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
from PIL import Image, ImageDraw, ImageFilter, ImageFont

OUT = Path(__file__).resolve().parent
FONT_DIR = Path("/usr/share/fonts/truetype/dejavu")
FONTS = sorted(FONT_DIR.glob("*.ttf"))
ARCH = "cnn28-conv5x5x5-pool-conv5x5x10-pool-fc128-fc10"
INTERVAL = (-10.0, 10.0)
N_TEST = 100


def render(digit, rng):
    size = 56
    img = Image.new("L", (size, size), 0)
    draw = ImageDraw.Draw(img)
    font = ImageFont.truetype(str(FONTS[rng.integers(len(FONTS))]), int(rng.integers(30, 42)))
    text = str(digit)
    box = draw.textbbox((0, 0), text, font=font)
    w, h = box[2] - box[0], box[3] - box[1]
    x = (size - w) / 2 - box[0] + rng.normal(0, 3)
    y = (size - h) / 2 - box[1] + rng.normal(0, 3)
    draw.text((x, y), text, fill=255, font=font, stroke_width=int(rng.integers(0, 3)), stroke_fill=255)
    img = img.rotate(rng.normal(0, 10), resample=Image.BILINEAR)
    img = img.filter(ImageFilter.GaussianBlur(rng.uniform(0.3, 1.2)))
    img = img.resize((28, 28), Image.LANCZOS)
    arr = np.asarray(img, dtype=np.float64) / 255.0
    arr = np.clip(arr + rng.normal(0, 0.03, arr.shape), 0, 1)
    # Quantize exactly as the PGM files store pixels.
    return np.round(arr * 255.0) / 255.0


def dataset(n, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n)
    images = np.stack([render(int(d), rng) for d in labels])
    return images, labels


def cheb_interp_relu(degree):
    """Monomial coefficients of the Chebyshev interpolant of ReLU on INTERVAL."""
    lo, hi = INTERVAL
    k = np.arange(degree + 1)
    nodes = np.cos((2 * k + 1) * math.pi / (2 * (degree + 1)))
    z = (hi - lo) / 2 * nodes + (hi + lo) / 2
    cheb = np.polynomial.chebyshev.chebfit(nodes, np.maximum(z, 0), degree)
    unit = np.polynomial.chebyshev.cheb2poly(cheb)
    # Substitute x = (2 z - lo - hi) / (hi - lo).
    scale = 2 / (hi - lo)
    shift = -(hi + lo) / (hi - lo)
    out = np.zeros(degree + 1)
    lin = np.polynomial.Polynomial([shift, scale])
    acc = np.polynomial.Polynomial([0.0])
    for i, c in enumerate(unit):
        acc = acc + c * lin**i
    out[: len(acc.coef)] = acc.coef
    return out


class PolyAct(nn.Module):
    def __init__(self, coeffs, clip):
        super().__init__()
        self.coeffs = [float(c) for c in coeffs]
        self.clip = clip

    def forward(self, x):
        if self.clip:
            x = torch.clamp(x, *INTERVAL)
        out = torch.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out


class Net(nn.Module):
    def __init__(self, act):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 5, 5, padding=2)
        self.conv2 = nn.Conv2d(5, 10, 5, padding=2)
        self.fc1 = nn.Linear(490, 128)
        self.fc2 = nn.Linear(128, 10)
        self.act = act
        self.pool = nn.AvgPool2d(2)

    def forward(self, x):
        x = self.pool(self.act(self.conv1(x)))
        x = self.pool(self.act(self.conv2(x)))
        x = x.permute(0, 2, 3, 1).reshape(x.shape[0], -1)
        x = self.act(self.fc1(x))
        return self.fc2(x)


def train(act, images, labels, seed, epochs=4):
    torch.manual_seed(seed)
    net = Net(act)
    opt = torch.optim.Adam(net.parameters(), lr=2e-3)
    x = torch.tensor(images, dtype=torch.float32).unsqueeze(1)
    y = torch.tensor(labels)
    for _ in range(epochs):
        perm = torch.randperm(len(x))
        for i in range(0, len(x), 64):
            idx = perm[i : i + 64]
            loss = nn.functional.cross_entropy(net(x[idx]), y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    return net


def export(net, path, activation, accuracy, scale_hint):
    tensors = []
    for name in ("conv1", "conv2", "fc1", "fc2"):
        layer = getattr(net, name)
        w = layer.weight.detach().double()
        if w.dim() == 4:
            w = w.permute(0, 2, 3, 1)
        tensors.append((f"{name}.weight", w.contiguous().numpy()))
        tensors.append((f"{name}.bias", layer.bias.detach().double().numpy()))
    header = {
        "format": "litd-weights",
        "version": 1,
        "architecture": ARCH,
        "flatten_order": "hwc",
        "activation": activation,
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
        "scale_hint": scale_hint,
        "training": {"test_accuracy": accuracy},
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode())
        f.write(b"\0")
        for _, t in tensors:
            f.write(t.astype("<f8").tobytes())


def logits64(net, images, act64):
    net64 = Net(act64).double()
    net64.load_state_dict(net.state_dict())
    with torch.no_grad():
        return net64(torch.tensor(images, dtype=torch.float64).unsqueeze(1)).numpy()


def write_pgm(path, arr):
    data = np.round(arr * 255).astype(np.uint8)
    path.write_bytes(b"P5\n28 28\n255\n" + data.tobytes())


def main():
    train_x, train_y = dataset(30000, 1)
    test_x, test_y = dataset(N_TEST, 2)
    poly = cheb_interp_relu(2)

    relu_net = train(nn.ReLU(), train_x, train_y, 7)
    # Unclipped, since encrypted inference cannot clip either.
    poly_net = train(PolyAct(poly, clip=False), train_x, train_y, 7)

    relu_logits = logits64(relu_net, test_x, nn.ReLU())
    poly_logits = logits64(poly_net, test_x, PolyAct(poly, clip=False))
    relu_acc = float((relu_logits.argmax(1) == test_y).mean())
    poly_acc = float((poly_logits.argmax(1) == test_y).mean())

    export(relu_net, OUT / "weights-relu.bin", {"kind": "relu"}, relu_acc, {"input": 8, "weight": 8})
    export(
        poly_net,
        OUT / "weights-poly2.bin",
        {"kind": "poly", "coeffs": [float(c) for c in poly], "interval": list(INTERVAL)},
        poly_acc,
        {"input": 8, "weight": 8},
    )
    img_dir = OUT / "digits"
    img_dir.mkdir(exist_ok=True)
    for i, arr in enumerate(test_x):
        write_pgm(img_dir / f"{i:03}.pgm", arr)
    golden = {
        "labels": [int(v) for v in test_y],
        "relu": {"accuracy": relu_acc, "logits": relu_logits.tolist()},
        "poly2": {"accuracy": poly_acc, "coeffs": [float(c) for c in poly], "logits": poly_logits.tolist()},
    }
    (OUT / "golden.json").write_text(json.dumps(golden))
    print(f"relu accuracy {relu_acc:.3f}, poly2 accuracy {poly_acc:.3f}")


if __name__ == "__main__":
    main()
