"""Fashion-MNIST, 100 clients, each holding 20% of the class labels.

Reports per-seed and mean local (averaged over clients) and global accuracy.
``--subset N`` trains on a stratified N-row subset when the full run does
not fit the machine.
"""
import argparse
import time

import numpy as np

from kahm.federation import LabeledDataset
from kahm.fedsim import PartitionSpec, preprocess_scale_flatten, preprocess_tanh, run_federation
from kahm.io import load_image_dataset


def stratified(X, y, size, seed):
    rng = np.random.default_rng(seed)
    classes = np.unique(y)
    rows = np.concatenate([rng.choice(np.flatnonzero(y == c), size // classes.size, replace=False) for c in classes])
    rows.sort()
    return X[rows], y[rows]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", required=True)
    ap.add_argument("--clients", type=int, default=100)
    ap.add_argument("--skew", type=float, default=0.2)
    ap.add_argument("--seeds", default="1,2,3")
    ap.add_argument("--subset", type=int, default=0)
    args = ap.parse_args()

    x_tr, y_tr, x_te, y_te = load_image_dataset(args.data)
    if args.subset:
        x_tr, y_tr = stratified(x_tr, np.asarray(y_tr), args.subset, seed=0)
    prep = lambda x: preprocess_tanh(preprocess_scale_flatten(x))
    train = LabeledDataset(prep(x_tr), np.asarray(y_tr) + 1, class_count=10)
    test = LabeledDataset(prep(x_te), np.asarray(y_te) + 1, class_count=10)
    local, glob = [], []
    for seed in (int(s) for s in args.seeds.split(",")):
        start = time.perf_counter()
        rep = run_federation(train, test, PartitionSpec(args.clients, args.skew, seed=seed))
        local.append(rep.averaged_accuracy)
        glob.append(rep.global_accuracy)
        print(f"seed={seed} local_accuracy={rep.averaged_accuracy:.4f} "
              f"global_accuracy={rep.global_accuracy:.4f} E={rep.assumption_E:.4g} "
              f"runtime={time.perf_counter() - start:.1f}s")
    print(f"mean_local_accuracy={100 * np.mean(local):.2f}")
    print(f"mean_global_accuracy={100 * np.mean(glob):.2f}")


if __name__ == "__main__":
    main()
