#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Builds the small MNIST IDX fixture under tests/data/mnist.

Source: the 5000-image MNIST extract bundled with the mlxtend wheel
(500 images per digit). The images are permuted with a fixed seed and split
into 2000 "train" and 500 "t10k" images; both slices come from the same
extract, so the t10k files are a held-out slice, not the official test set.

Usage: tools/make_mnist_fixture.py [out_dir]   (needs pip + numpy)
"""
import glob
import gzip
import io
import struct
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

TRAIN, TEST, SEED = 2000, 500, 20240607


def write_idx(path, magic, arr):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in arr.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + arr.astype(np.uint8).tobytes())


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/mnist"
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call([sys.executable, "-m", "pip", "download", "-q",
                               "--no-deps", "-d", tmp, "mlxtend==0.24.0"])
        wheel = zipfile.ZipFile(glob.glob(tmp + "/*.whl")[0])
        raw = gzip.decompress(wheel.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",").astype(np.int64)
    perm = np.random.RandomState(SEED).permutation(len(table))
    table = table[perm]
    images, labels = table[:, :-1].reshape(-1, 28, 28), table[:, -1]
    write_idx(f"{out}/train-images-idx3-ubyte.gz", 0x803, images[:TRAIN])
    write_idx(f"{out}/train-labels-idx1-ubyte.gz", 0x801, labels[:TRAIN])
    write_idx(f"{out}/t10k-images-idx3-ubyte.gz", 0x803, images[-TEST:])
    write_idx(f"{out}/t10k-labels-idx1-ubyte.gz", 0x801, labels[-TEST:])


if __name__ == "__main__":
    main()
