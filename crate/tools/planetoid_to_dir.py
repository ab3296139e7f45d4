#!/usr/bin/env python3
"""Convert Planetoid `ind.<name>.*` files into a regfilter dataset directory.

Usage: planetoid_to_dir.py RAW_DIR NAME OUT_DIR

RAW_DIR holds ind.NAME.{x,y,tx,ty,allx,ally,graph,test.index}. The split is
the standard one: the first 20 labeled nodes per class for training, nodes
140..640 (or the analogue) for validation and the test index file for
testing. Citeseer test nodes without features become zero-feature nodes
with label -1.
"""

import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load(raw, name, part):
    with open(raw / f"ind.{name}.{part}", "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def main():
    raw, name, out = Path(sys.argv[1]), sys.argv[2], Path(sys.argv[3])
    x, y, tx, ty, allx, ally, graph = (load(raw, name, p) for p in ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_index = [int(line) for line in open(raw / f"ind.{name}.test.index")]
    test_sorted = np.sort(test_index)

    n_full = max(max(graph) + 1, test_sorted[-1] + 1)
    tx_ext = sp.lil_matrix((test_sorted[-1] - test_sorted[0] + 1, x.shape[1]))
    ty_ext = np.zeros((test_sorted[-1] - test_sorted[0] + 1, y.shape[1]))
    tx_ext[test_sorted - test_sorted[0], :] = tx
    ty_ext[test_sorted - test_sorted[0], :] = ty

    features = sp.vstack((allx, tx_ext)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels_onehot = np.vstack((ally, ty_ext))
    labels_onehot[test_index, :] = labels_onehot[test_sorted, :]
    n = features.shape[0]
    assert n <= n_full

    labels = np.where(labels_onehot.sum(axis=1) > 0, labels_onehot.argmax(axis=1), -1)

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    train = list(range(y.shape[0]))
    val = list(range(y.shape[0], y.shape[0] + 500))
    test = [int(i) for i in test_sorted if labels[i] >= 0]

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "graph.edges", "w") as fh:
        for u, v in sorted(edges):
            fh.write(f"{u}\t{v}\t1\n")
    dense = features.toarray()
    with open(out / "features.csv", "w") as fh:
        for row in dense:
            fh.write(",".join("1" if v == 1 else repr(float(v)) for v in row) + "\n")
    with open(out / "labels.csv", "w") as fh:
        fh.write("".join(f"{int(c)}\n" for c in labels))
    with open(out / "split.json", "w") as fh:
        json.dump({"train": train, "val": val, "test": test}, fh)
        fh.write("\n")
    print(f"nodes={n} edges={len(edges)} train={len(train)} val={len(val)} test={len(test)}")


if __name__ == "__main__":
    main()
