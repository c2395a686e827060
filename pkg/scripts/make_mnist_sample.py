"""Write the 5000-image MNIST sample bundled with mlxtend as IDX files.

4000 images become train-*-ubyte, 1000 held-out images become t10k-*-ubyte.

    python scripts/make_mnist_sample.py data/mnist
"""

import sys

import numpy as np
from mlxtend.data import mnist_data

from portanet.data import write_mnist_dir


def main(out_dir: str) -> None:
    x, y = mnist_data()
    write_mnist_dir(out_dir, x.astype(np.uint8).reshape(-1, 28, 28), y, test_count=1000)
    print(f"wrote MNIST sample to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")
