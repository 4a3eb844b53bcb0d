#!/usr/bin/env python3
"""Fetch the Cora citation benchmark and convert it to this repo's formats.

Downloads the Planetoid packaging of Cora (the standard benchmark
distribution: binary bag-of-words features, citation edges, and the
public train/val/test split) and writes:

    <out>/edges.tsv       src<TAB>dst, one undirected citation per line
    <out>/features.bin    GFM1 binary: u64 n, u64 f, n*f little-endian f32
    <out>/labels.txt      one class id per line (line i = node i)
    <out>/public_split.txt  [train]/[val]/[test] sections, public split

Requires numpy and scipy (the upstream files are pickled sparse matrices).

Usage:
    python3 scripts/fetch_cora.py --out data/cora
    python3 scripts/fetch_cora.py --out data/cora \
        --mirror https://<artifactory-host>/artifactory/github
"""

import argparse
import pickle
import struct
import sys
import urllib.request
from pathlib import Path

import numpy as np
import scipy.sparse as sp

UPSTREAM = "https://github.com/kimiyoung/planetoid/raw/master/data"
PARTS = ["x", "tx", "allx", "y", "ty", "ally", "graph", "test.index"]


def fetch(base: str, name: str, cache: Path) -> Path:
    cache.mkdir(parents=True, exist_ok=True)
    dest = cache / name
    if dest.exists() and dest.stat().st_size > 0:
        print(f"  cached {name}")
        return dest
    url = f"{base}/ind.cora.{name}" if not name.startswith("ind.") else f"{base}/{name}"
    print(f"  fetching {url}")
    with urllib.request.urlopen(url, timeout=120) as resp:
        dest.write_bytes(resp.read())
    return dest


def load_pickle(path: Path):
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/cora", type=Path)
    ap.add_argument(
        "--mirror",
        default=None,
        help="rewrite github.com/<path> to <mirror>/<path> (proxy setups)",
    )
    args = ap.parse_args()

    base = UPSTREAM
    if args.mirror:
        base = UPSTREAM.replace("https://github.com", args.mirror.rstrip("/"))

    cache = args.out / "upstream"
    paths = {name: fetch(base, name, cache) for name in PARTS}

    x = load_pickle(paths["x"])
    tx = load_pickle(paths["tx"])
    allx = load_pickle(paths["allx"])
    y = load_pickle(paths["y"])
    ty = load_pickle(paths["ty"])
    ally = load_pickle(paths["ally"])
    graph = load_pickle(paths["graph"])
    test_idx = np.loadtxt(paths["test.index"], dtype=np.int64)

    # Standard reconstruction: stack (allx, tx), then permute the test rows
    # back into their true node positions.
    features = sp.vstack([allx, tx]).tolil()
    labels = np.vstack([ally, ty])
    sorted_test = np.sort(test_idx)
    features[test_idx, :] = features[sorted_test, :]
    labels[test_idx, :] = labels[sorted_test, :]
    features = np.asarray(features.todense(), dtype=np.float32)
    class_ids = labels.argmax(axis=1).astype(np.int64)

    n, f = features.shape
    k = labels.shape[1]
    counts = np.bincount(class_ids, minlength=k)
    print(f"nodes {n}, features {f}, classes {k}")
    print(f"class sizes: {counts.tolist()}")
    assert (n, f, k) == (2708, 1433, 7), "unexpected Cora shape"

    args.out.mkdir(parents=True, exist_ok=True)

    edges = set()
    for src, neighbors in graph.items():
        for dst in neighbors:
            if src == dst:
                continue
            edges.add((min(src, dst), max(src, dst)))
    with (args.out / "edges.tsv").open("w") as fh:
        for src, dst in sorted(edges):
            fh.write(f"{src}\t{dst}\n")
    print(f"undirected edges: {len(edges)}")

    with (args.out / "features.bin").open("wb") as fh:
        fh.write(b"GFM1")
        fh.write(struct.pack("<QQ", n, f))
        fh.write(features.tobytes(order="C"))

    with (args.out / "labels.txt").open("w") as fh:
        for c in class_ids:
            fh.write(f"{c}\n")

    # Public split: first 140 nodes train (20/class), next 500 validation,
    # test.index nodes test.
    with (args.out / "public_split.txt").open("w") as fh:
        fh.write("[train]\n")
        for i in range(x.shape[0]):
            fh.write(f"{i}\n")
        fh.write("[val]\n")
        for i in range(x.shape[0], x.shape[0] + 500):
            fh.write(f"{i}\n")
        fh.write("[test]\n")
        for i in sorted_test:
            fh.write(f"{i}\n")

    print(f"wrote dataset to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
