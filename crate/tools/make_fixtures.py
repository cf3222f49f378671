"""Train the bundled toy digit MLP and write the tensor-file fixtures.

Usage: python3 tools/make_fixtures.py [out_dir]

Writes `digits_mlp.rtf` (weights) and `digits_test.rtf` (held-out samples)
into crates/core/fixtures/ by default. Deterministic for a fixed numpy.
"""
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits
from sklearn.model_selection import train_test_split

MAGIC = b"RNTF"
VERSION = 1


def write_tensor_file(path, tensors):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors:
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<Q", d))
            f.write(arr.tobytes(order="C"))


def train(x, y, hidden=32, epochs=300, lr=1e-2, seed=7):
    rng = np.random.default_rng(seed)
    n_in, n_out = x.shape[1], 10
    params = {
        "w1": rng.normal(0, np.sqrt(2 / n_in), (hidden, n_in)),
        "b1": np.zeros(hidden),
        "w2": rng.normal(0, np.sqrt(2 / hidden), (n_out, hidden)),
        "b2": np.zeros(n_out),
    }
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v) for k, v in params.items()}
    onehot = np.eye(n_out)[y]
    step = 0
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), 64):
            idx = order[start:start + 64]
            xb, tb = x[idx], onehot[idx]
            h_pre = xb @ params["w1"].T + params["b1"]
            h = np.maximum(h_pre, 0)
            logits = h @ params["w2"].T + params["b2"]
            logits -= logits.max(axis=1, keepdims=True)
            prob = np.exp(logits)
            prob /= prob.sum(axis=1, keepdims=True)
            g_logits = (prob - tb) / len(xb)
            grads = {
                "w2": g_logits.T @ h + 1e-4 * params["w2"],
                "b2": g_logits.sum(0),
            }
            g_h = g_logits @ params["w2"] * (h_pre > 0)
            grads["w1"] = g_h.T @ xb + 1e-4 * params["w1"]
            grads["b1"] = g_h.sum(0)
            step += 1
            for k in params:
                m[k] = 0.9 * m[k] + 0.1 * grads[k]
                v[k] = 0.999 * v[k] + 0.001 * grads[k] ** 2
                mh = m[k] / (1 - 0.9 ** step)
                vh = v[k] / (1 - 0.999 ** step)
                params[k] -= lr * mh / (np.sqrt(vh) + 1e-8)
    return params


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "crates/core/fixtures"
    out.mkdir(parents=True, exist_ok=True)
    digits = load_digits()
    x = digits.data.astype(np.float64) / 16.0
    y = digits.target
    x_tr, x_te, y_tr, y_te = train_test_split(x, y, test_size=600, random_state=0, stratify=y)
    p = train(x_tr, y_tr)
    h = np.maximum(x_te @ p["w1"].T + p["b1"], 0)
    acc = ((h @ p["w2"].T + p["b2"]).argmax(1) == y_te).mean()
    print(f"float test accuracy: {acc:.4f}")
    write_tensor_file(out / "digits_mlp.rtf", [
        ("fc1.weight", p["w1"]), ("fc1.bias", p["b1"]),
        ("fc2.weight", p["w2"]), ("fc2.bias", p["b2"]),
    ])
    write_tensor_file(out / "digits_test.rtf", [
        ("x", x_te), ("labels", y_te.astype(np.float64)),
    ])


if __name__ == "__main__":
    main()
