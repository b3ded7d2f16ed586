"""Writes the scikit-learn 8x8 digits set as IDX files under data/digits."""

import argparse
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits


def write_idx(path, magic, array):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(array.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="data/digits")
    args = parser.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    digits = load_digits()
    # Pixel intensities are 0..16; stretch them to the usual 0..255 range.
    images = np.rint(digits.images * (255.0 / 16.0))
    write_idx(out / "digits-images-idx3-ubyte", 0x00000803, images)
    write_idx(out / "digits-labels-idx1-ubyte", 0x00000801, digits.target)
    print(f"wrote {len(digits.target)} samples to {out}")


if __name__ == "__main__":
    main()
