#!/usr/bin/env python3
"""Train the desk-scale CNN workload and export it as XBMT containers.

The 8x8 scikit-learn digits are upsampled to 28x28 grayscale. Writes
<out>/digits_cnn.xbmt (graph + weights) and <out>/digits_test.xbmt (held-out
images + labels).
"""

import argparse
import struct
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from sklearn.datasets import load_digits

GRAPH = """input 1 28 28
conv2d conv1 in=1 out=16 kernel=3 stride=1 padding=1
relu
maxpool 2
conv2d conv2 in=16 out=32 kernel=3 stride=1 padding=1
relu
maxpool 2
conv2d conv3 in=32 out=64 kernel=3 stride=1 padding=1
relu
maxpool 2
flatten
linear fc in=576 out=10
"""

# Activations are clipped where the 16-bit (13 fractional) format saturates.
ACT_LIMIT = 3.99


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 16, 3, padding=1)
        self.conv2 = nn.Conv2d(16, 32, 3, padding=1)
        self.conv3 = nn.Conv2d(32, 64, 3, padding=1)
        self.fc = nn.Linear(576, 10)

    def forward(self, x):
        for conv in (self.conv1, self.conv2, self.conv3):
            x = F.max_pool2d(torch.clamp(conv(x), 0.0, ACT_LIMIT), 2)
        return self.fc(torch.flatten(x, 1))


def write_xbmt(path, blocks):
    dtypes = {np.dtype(np.float32): 1, np.dtype(np.float64): 2, np.dtype(np.int64): 3, np.dtype(np.uint8): 4}
    table = b""
    payload = b""
    for name, arr in blocks:
        arr = np.ascontiguousarray(arr)
        data = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        encoded = name.encode()
        table += struct.pack("<H", len(encoded)) + encoded
        table += struct.pack("<BB", dtypes[arr.dtype], arr.ndim)
        table += b"".join(struct.pack("<Q", d) for d in arr.shape)
        table += struct.pack("<QQ", len(payload), len(data))
        payload += data
    with open(path, "wb") as f:
        f.write(b"XBMT" + struct.pack("<HI", 1, len(blocks)) + table + payload)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--test", type=int, default=400)
    args = parser.parse_args()

    torch.manual_seed(args.seed)
    torch.set_num_threads(1)
    rng = np.random.default_rng(args.seed)

    digits = load_digits()
    images = torch.tensor(digits.images / 16.0, dtype=torch.float32).unsqueeze(1)
    images = F.interpolate(images, size=(28, 28), mode="bilinear", align_corners=False).clamp(0.0, 1.0)
    labels = torch.tensor(digits.target, dtype=torch.int64)
    order = rng.permutation(len(labels))
    test_idx, train_idx = order[: args.test], order[args.test :]

    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=2e-3)
    x_train, y_train = images[train_idx], labels[train_idx]
    for epoch in range(args.epochs):
        perm = torch.randperm(len(y_train))
        for start in range(0, len(perm), 64):
            batch = perm[start : start + 64]
            opt.zero_grad()
            loss = F.cross_entropy(net(x_train[batch]), y_train[batch])
            loss.backward()
            opt.step()
    net.eval()
    with torch.no_grad():
        acc = (net(images[test_idx]).argmax(1) == labels[test_idx]).float().mean().item()
    print(f"float test accuracy: {acc:.4f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    blocks = [("graph", np.frombuffer(GRAPH.encode(), dtype=np.uint8))]
    for name, tensor in net.state_dict().items():
        blocks.append((name, tensor.numpy().astype(np.float32)))
    write_xbmt(out / "digits_cnn.xbmt", blocks)
    write_xbmt(
        out / "digits_test.xbmt",
        [("images", images[test_idx].numpy().astype(np.float32)), ("labels", labels[test_idx].numpy().astype(np.int64))],
    )


if __name__ == "__main__":
    main()
