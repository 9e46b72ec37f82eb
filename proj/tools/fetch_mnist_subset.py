#!/usr/bin/env python3
# Copyright 2026 The mkor-lab Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes MNIST IDX files into data/mnist.

If the canonical train-images-idx3-ubyte(.gz) files are already present they
are just decompressed. Otherwise the 5000-image MNIST subset that ships inside
the mlxtend wheel is fetched with pip and converted.
"""

import argparse
import glob
import gzip
import os
import shutil
import struct
import subprocess
import sys
import tempfile
import zipfile


def write_idx(out_dir, pixels, labels, prefix):
    n = len(labels)
    with open(os.path.join(out_dir, f"{prefix}-images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 0x803, n, 28, 28))
        f.write(bytes(pixels))
    with open(os.path.join(out_dir, f"{prefix}-labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 0x801, n))
        f.write(bytes(labels))


def from_canonical(out_dir):
    done = False
    for gz in glob.glob(os.path.join(out_dir, "*-ubyte.gz")):
        with gzip.open(gz) as src, open(gz[:-3], "wb") as dst:
            shutil.copyfileobj(src, dst)
        done = True
    return done or os.path.exists(os.path.join(out_dir, "train-images-idx3-ubyte"))


def from_mlxtend(out_dir):
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps",
                        "-q", "-d", tmp], check=True)
        wheel = glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]
        with zipfile.ZipFile(wheel) as z:
            rows = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode().splitlines()
    pixels, labels = bytearray(), bytearray()
    for row in rows:
        v = [int(float(x)) for x in row.split(",")]
        pixels.extend(v[:784])
        labels.append(v[784])
    write_idx(out_dir, pixels, labels, "subset5k")
    print(f"wrote {len(labels)} images to {out_dir}/subset5k-*-ubyte")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    if from_canonical(args.out):
        print(f"canonical MNIST files present in {args.out}")
        return
    from_mlxtend(args.out)


if __name__ == "__main__":
    main()
