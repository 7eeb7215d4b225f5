"""Write the latent-factor regression set as CSV.

    python scripts/make_synthetic.py --seed 0 --out data/latent_factor.csv
"""
import argparse
from pathlib import Path

from deeprep.dataio import from_arrays, save_csv
from deeprep.synthetic import latent_factor_regression


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--p", type=int, default=100)
    ap.add_argument("--x-noise", type=float, default=0.3)
    ap.add_argument("--out", default="data/latent_factor.csv")
    args = ap.parse_args()
    X, y, _ = latent_factor_regression(n=args.n, p=args.p, x_noise=args.x_noise, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(from_arrays(X, y), out)
    print(f"wrote {out} ({args.n} rows, {args.p} features)")


if __name__ == "__main__":
    main()
