"""Write the three-blob toy problem as train/test CSV files for the CLI."""
import argparse

from kahm.io import write_dataset
from kahm.synthetic import make_blobs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default=".")
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--clients", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    train = make_blobs(args.per_class, seed=args.seed, n_clients=args.clients)
    test = make_blobs(max(1, args.per_class // 2), seed=args.seed + 1)
    write_dataset(f"{args.out_dir}/blobs_train.csv", train)
    write_dataset(f"{args.out_dir}/blobs_test.csv", test, with_clients=False)
    print(f"wrote {train.n_samples} training and {test.n_samples} test rows to {args.out_dir}")


if __name__ == "__main__":
    main()
