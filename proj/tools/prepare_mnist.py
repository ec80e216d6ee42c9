#!/usr/bin/env python3
"""Install the original MNIST IDX files into the cache layout `load_mnist` reads.

The npm package `mnist-data` ships the four uncompressed IDX files (60,000
train / 10,000 test). They are checked against the published digests, copied
to the output directory and listed in a SHA256SUMS manifest.

Usage:
    npm pack mnist-data@1.2.6 && tar xzf mnist-data-1.2.6.tgz
    python3 tools/prepare_mnist.py package/data $MRSNN_CACHE_DIR/mnist
"""

import argparse
import hashlib
import shutil
from pathlib import Path

DIGESTS = {
    "train-images-idx3-ubyte": "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    "train-labels-idx1-ubyte": "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    "t10k-images-idx3-ubyte": "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    "t10k-labels-idx1-ubyte": "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("src_dir", type=Path)
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, digest in sorted(DIGESTS.items()):
        data = (args.src_dir / name).read_bytes()
        got = hashlib.sha256(data).hexdigest()
        if got != digest:
            raise SystemExit(f"{name}: sha256 {got} does not match {digest}")
        (args.out_dir / name).write_bytes(data)
        lines.append(f"{digest}  {name}")
    (args.out_dir / "SHA256SUMS").write_text("\n".join(lines) + "\n")
    print(f"installed MNIST into {args.out_dir}")


if __name__ == "__main__":
    main()
