#!/usr/bin/env python3
"""Drive every CLI subcommand on synthetic embedding files.

Builds two groups of synthetic "sentences" sharing a common prefix
subspace (a desk-scale stand-in for the two-context prompt sets), plus a
token sequence with self-consistent attention, then runs entropy,
infogain, lasso, distances and pca on them.

    python scripts/run_synthetic_pipeline.py --out demo
"""

import argparse
import subprocess
import sys
from pathlib import Path

import numpy as np

from embed_infolab import tensor_io


def make_sentences(rng, out: Path) -> None:
    d = 24
    contexts = {"king": rng.standard_normal(d), "queen": rng.standard_normal(d)}
    for name, base in contexts.items():
        for i in range(5):
            rows = np.stack([base + 0.15 * rng.standard_normal(d) for _ in range(6)])
            rows /= np.linalg.norm(rows, axis=1, keepdims=True)
            tensor_io.write_tensor(out / f"{name}_{i}.emb1", tensor_io.TensorFile(rows))


def make_token_sequence(rng, out: Path) -> None:
    n, d, heads = 12, 24, 4
    w = np.zeros((heads, n, n))
    for h in range(heads):
        for i in range(n):
            off = rng.random(i)
            off = off / off.sum() * 0.2 if i else off
            w[h, i, :i] = off
            w[h, i, i] = 1.0 - off.sum() if i else 1.0
    values = rng.standard_normal((n, d))
    z = np.tril(w.mean(axis=0)) @ values
    tensor_io.write_tensor(out / "seq.emb1", tensor_io.TensorFile(z))
    tensor_io.write_tensor(out / "seq.attn.emb1", tensor_io.TensorFile(w))
    tensor_io.write_tensor(out / "seq.values.emb1", tensor_io.TensorFile(values))
    tokens = tuple(f"tok{i}" for i in range(n))
    tensor_io.write_sidecar(out / "seq.tokens.json", tensor_io.TokenSidecar(tokens=tokens))


def cli(*argv) -> None:
    cmd = [sys.executable, "-m", "embed_infolab.cli", *map(str, argv)]
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)
    (out / "sentences").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    make_sentences(rng, out / "sentences")
    make_token_sequence(rng, out)

    cli("entropy", "--input", out / "seq.emb1", "--output", out / "entropy.json")
    cli("infogain", "--input", out / "seq.emb1", "--out-csv", out / "infogain.csv")
    cli("lasso", "--input", out / "seq.emb1", "--attention", out / "seq.attn.emb1",
        "--values", out / "seq.values.emb1", "--sidecar", out / "seq.tokens.json",
        "--no-normalize", "--out-json", out / "lasso.json", "--beta-csv", out / "beta.csv")
    cli("distances", "--input-dir", out / "sentences", "--mode", "mean", "--metric", "l2",
        "--out-csv", out / "dist_mean_l2.csv")
    cli("distances", "--input-dir", out / "sentences", "--mode", "cov", "--metric", "js",
        "--out-csv", out / "dist_cov_js.csv")
    cli("pca", "--input-dir", out / "sentences", "--mode", "mean",
        "--out-csv", out / "pca.csv")
    print(f"all outputs under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
