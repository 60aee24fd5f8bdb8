#!/usr/bin/env python3
"""Write MNIST-format IDX files from the digits bundled in the npm `mnist` package.

The package (https://www.npmjs.com/package/mnist) ships 10,000 MNIST digits as
JSON arrays of pixel intensities already divided by 255 and rounded to three
decimals. This script restores byte intensities and writes them as

    <out>/train-images-idx3-ubyte
    <out>/train-labels-idx1-ubyte

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import json
import struct
import sys
from pathlib import Path


def main(digits_dir: str, out_dir: str) -> None:
    images = bytearray()
    labels = bytearray()
    count = 0
    for digit in range(10):
        data = json.loads((Path(digits_dir) / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            raise SystemExit(f"{digit}.json: length {len(data)} is not a multiple of 784")
        for v in data:
            images.append(max(0, min(255, round(v * 255))))
        n = len(data) // 784
        labels.extend([digit] * n)
        count += n
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(images)
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(labels)
    print(f"wrote {count} images to {out}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        raise SystemExit(__doc__)
    main(sys.argv[1], sys.argv[2])
