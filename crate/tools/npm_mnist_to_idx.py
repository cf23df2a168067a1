"""Convert the digit JSON files shipped in the `mnist` npm package into IDX files.

Usage: python3 tools/npm_mnist_to_idx.py <package/src/digits> <out_dir>

Each JSON file `<d>.json` holds {"data": [...]} with 784 floats per image,
pixel values rounded to three decimals of v/255. Values are mapped back to
u8 with round(x * 255). Images are written grouped by digit, 0 through 9.
"""
import gzip
import json
import os
import struct
import sys


def main(src, out):
    images = []
    labels = []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as fh:
            data = json.load(fh)["data"]
        assert len(data) % 784 == 0
        for k in range(len(data) // 784):
            px = data[k * 784:(k + 1) * 784]
            images.append(bytes(int(round(v * 255)) for v in px))
            labels.append(digit)
    n = len(images)
    os.makedirs(out, exist_ok=True)
    with gzip.GzipFile(os.path.join(out, "images-idx3-ubyte.gz"), "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for img in images:
            fh.write(img)
    with gzip.GzipFile(os.path.join(out, "labels-idx1-ubyte.gz"), "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(bytes(labels))
    print(n, "images written")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
