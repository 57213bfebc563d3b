"""Command-line interface: one executable, one subcommand per analysis.

Outputs are written atomically (temp file + rename), floats are printed
with shortest round-trip precision, and a fixed config + seed always
produces byte-identical files.  Scalars and summaries go to JSON, series
go to CSV; never both in one file.  The environment variable
EMBED_INFOLAB_THREADS caps internal parallelism (distance matrices).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import covdist, infogain, scaling_sim, selftest, tensor_io, token_select
from .entropy import (
    EmbeddingMatrix,
    EntropyParams,
    fit_power_law,
    logdet_entropy,
    max_entropy,
    normalized_entropy,
)
from .errors import ConfigurationError, InfolabError

THREADS_ENV = "EMBED_INFOLAB_THREADS"

_FLAG_RULES = {
    "epsilon": (lambda v: v > 0, "must be > 0"),
    "sigma": (lambda v: v > 0, "must be > 0"),
    "lam": (lambda v: v >= 0, "must be >= 0"),
    "threshold": (lambda v: v >= 0, "must be >= 0"),
    "gamma": (lambda v: v > 0, "must be > 0"),
    "alpha": (lambda v: v > 0, "must be > 0"),
    "m": (lambda v: v >= 2, "must be >= 2"),
    "b": (lambda v: v > 0, "must be > 0"),
    "c": (lambda v: v >= 0, "must be >= 0"),
    "delta": (lambda v: v > 0, "must be > 0"),
    "r": (lambda v: v >= 1, "must be >= 1"),
    "gamma_d": (lambda v: v > 0, "must be > 0"),
    "points": (lambda v: v >= 3, "must be >= 3"),
    "min_x": (lambda v: v > 0, "must be > 0"),
    "max_x": (lambda v: v > 0, "must be > 0"),
    "k": (lambda v: v >= 1, "must be >= 1"),
    "seed": (lambda v: v >= 0, "must be >= 0"),
}

_FLAG_NAMES = {"lam": "--lambda", "r": "--r", "gamma_d": "--gamma-d", "min_x": "--min-x",
               "max_x": "--max-x", "m": "--M"}


@dataclass
class RunConfig:
    """Validated bag of options for one subcommand invocation."""

    subcommand: str
    options: dict = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        opts = {k: v for k, v in vars(args).items() if k != "subcommand"}
        return cls(subcommand=args.subcommand, options=opts)

    def validate(self) -> None:
        for name, value in self.options.items():
            if value is None or name not in _FLAG_RULES:
                continue
            ok, why = _FLAG_RULES[name]
            if not ok(value):
                flag = _FLAG_NAMES.get(name, "--" + name.replace("_", "-"))
                raise ConfigurationError(f"{flag} {why}, got {value}")

    def __getattr__(self, name):
        try:
            return self.options[name]
        except KeyError:
            raise AttributeError(name) from None


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _csv(rows, header: str) -> str:
    lines = [header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def emit_plot_data(series, path) -> None:
    """Write labeled (x, y) rows as CSV with header ``series,x,y``.

    Rows keep their input order and floats round-trip exactly.
    """
    rows = list(series)
    if not rows:
        raise ConfigurationError("emit_plot_data needs at least one row")
    _atomic_write(path, _csv(rows, "series,x,y"))


def _load_matrix(path) -> np.ndarray:
    t = tensor_io.read_tensor(path)
    arr = t.as_float64()
    if arr.ndim != 2:
        raise ConfigurationError(f"{path}: expected a 2-D [tokens, dim] tensor, got {t.shape}")
    return arr


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_entropy(cfg: RunConfig) -> int:
    arr = _load_matrix(cfg.input)
    params = EntropyParams(epsilon=cfg.epsilon)
    z = EmbeddingMatrix.from_rows(arr, normalize=cfg.normalize)
    if not cfg.normalize:
        norms = np.linalg.norm(arr, axis=1)
        if np.all(np.abs(norms - 1.0) <= 1e-9):
            z = EmbeddingMatrix(arr, row_normalized=True)
    payload = {
        "n": z.n,
        "d": z.d,
        "epsilon": cfg.epsilon,
        "entropy": logdet_entropy(z, params),
        "max_entropy": max_entropy(z.n, z.d, params),
    }
    if z.row_normalized:
        payload["normalized_entropy"] = normalized_entropy(z, params)
    _atomic_write(cfg.output, _json_text(payload))
    return 0


def _sweep_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.min_x >= cfg.max_x:
        raise ConfigurationError(f"--min-x must be below --max-x, got {cfg.min_x} >= {cfg.max_x}")
    return np.logspace(np.log10(cfg.min_x), np.log10(cfg.max_x), cfg.points)


def _cmd_scaling(cfg: RunConfig) -> int:
    world = scaling_sim.SkillWorld(
        m=cfg.m, alpha=cfg.alpha, b=cfg.b, c=cfg.c, delta=cfg.delta,
        neurons_per_skill=cfg.r, a_const=cfg.a_const, gamma_d=cfg.gamma_d,
    )
    grid = _sweep_grid(cfg)
    if cfg.sweep == "skills":
        ns = np.unique(np.round(grid).astype(np.int64))
        pairs = [(int(n), scaling_sim.conditional_entropy_after(world, int(n))) for n in ns]
    elif cfg.sweep == "params":
        counts = np.unique(np.round(grid).astype(np.int64))
        pairs = scaling_sim.entropy_vs_parameters(world, counts.tolist())
    elif cfg.sweep == "flops":
        ns = np.unique(np.round(grid).astype(np.int64))
        pairs = scaling_sim.flops_sweep(world, ns.tolist())
    else:
        pairs = scaling_sim.entropy_vs_dataset(world, grid.tolist())
    xs = [x for x, _ in pairs]
    gaps = [h - world.c for _, h in pairs]
    if min(gaps) <= 0:
        raise ConfigurationError("sweep produced a zero entropy gap; shrink --max-x below M")
    fit = fit_power_law(xs, gaps)
    _atomic_write(cfg.out_csv, _csv(pairs, "x,y"))
    _atomic_write(cfg.out_json, _json_text({
        "exponent": fit.exponent, "coefficient": fit.coefficient, "r_squared": fit.r_squared,
    }))
    return 0


def _cmd_infogain(cfg: RunConfig) -> int:
    arr = _load_matrix(cfg.input)
    sigma2 = cfg.sigma**2
    state = infogain.KernelState(sigma2)
    d = arr.shape[1]
    rows = []
    total = 0.0
    for t in range(arr.shape[0]):
        norm = np.linalg.norm(arr[t])
        if norm == 0.0:
            raise ConfigurationError(f"row {t} of {cfg.input} is zero; cannot normalize")
        z = arr[t] / norm
        var = infogain.posterior_variance(state, z)
        inc = infogain.info_gain_increment(state, z)
        state.append(z)
        # chain rule: the total gain is the exact sum of the increments
        total += inc.value
        norm_gain = total / (d * float(np.log1p(state.t / sigma2)))
        rows.append((t + 1, total, norm_gain, inc.value, inc.paper_form, var))
    header = "t,info_gain,normalized_gain,increment,paper_increment,posterior_variance"
    _atomic_write(cfg.out_csv, _csv(rows, header))
    return 0


def _cmd_lasso(cfg: RunConfig) -> int:
    arr = _load_matrix(cfg.input)
    if arr.shape[0] < 2:
        raise ConfigurationError("lasso needs at least 2 tokens (context + target)")
    rows = arr
    if cfg.normalize:
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ConfigurationError("cannot normalize: zero row in input tensor")
        rows = arr / norms
    context, target = rows[:-1], rows[-1]
    beta = token_select.lasso_fit(context, target, cfg.lam)
    lasso_sel = token_select.select_by_threshold(beta, cfg.threshold)
    if cfg.sidecar:
        sidecar = tensor_io.read_sidecar(cfg.sidecar)
        sidecar.check_length(arr.shape[0])
    else:
        sidecar = tensor_io.TokenSidecar(tokens=tuple(str(i) for i in range(arr.shape[0])))

    extras = {
        "lambda": cfg.lam,
        "threshold": cfg.threshold,
        "kkt_residual": token_select.kkt_residual(context, target, beta, cfg.lam),
    }
    attn_sel = token_select.SelectionResult(indices=(), scores=(), threshold=cfg.threshold)
    if cfg.attention:
        w = tensor_io.read_tensor(cfg.attention).as_float64()
        if w.ndim == 4:
            w = w[cfg.layer]
        att = token_select.AttentionTensor(w, layer_index=cfg.layer)
        if att.length != arr.shape[0]:
            raise ConfigurationError(
                f"attention covers {att.length} tokens, input has {arr.shape[0]}"
            )
        avg = token_select.average_attention(att)
        attn_sel = token_select.select_by_threshold(avg[-1, :-1], cfg.threshold)
        if cfg.values:
            v = tensor_io.read_tensor(cfg.values).as_float64()
            if v.shape[0] != arr.shape[0]:
                raise ConfigurationError(
                    f"values cover {v.shape[0]} tokens, input has {arr.shape[0]}"
                )
            gap = float(np.max(np.abs(np.tril(avg) @ v - arr)))
            if gap <= token_select.UNROLL_IDENTITY_TOL:
                unroll = token_select.attention_unroll_residual(avg, v, arr)
                extras["unroll"] = {
                    "residual_norm": unroll.residual_norm,
                    "identity_gap": gap,
                }
            else:
                extras["unroll"] = {"skipped": True, "identity_gap": gap}
    report = token_select.compare_selections(lasso_sel, attn_sel, sidecar)
    report = token_select.SelectionReport(
        lasso=report.lasso, attention=report.attention, overlap=report.overlap,
        jaccard=report.jaccard, extras=extras,
    )
    _atomic_write(cfg.out_json, report.to_json() + "\n")
    if cfg.beta_csv:
        _atomic_write(cfg.beta_csv, _csv(list(enumerate(beta.tolist())), "index,beta"))
    return 0


_MODE_ALIASES = {"last": "last_token", "mean": "mean", "cov": "covariance"}


def _load_sentences(cfg: RunConfig, mode: str):
    paths = sorted(Path(cfg.input_dir).glob(cfg.pattern))
    if not paths:
        raise ConfigurationError(f"no files matching {cfg.pattern!r} in {cfg.input_dir}")
    labels, sentences = [], []
    center = bool(cfg.options.get("center", False))
    width = None
    for p in paths:
        z = EmbeddingMatrix(tensor_io.read_tensor(p).as_float64())
        if width is None:
            width = z.d
        elif z.d != width:
            raise ConfigurationError(f"{p.name} has dim {z.d}, other sentences have {width}")
        sentences.append(covdist.summarize(z, mode, center=center))
        labels.append(p.stem)
    return labels, sentences


def _cmd_distances(cfg: RunConfig) -> int:
    mode = _MODE_ALIASES[cfg.mode]
    labels, sentences = _load_sentences(cfg, mode)
    mat = covdist.distance_matrix(sentences, cfg.metric, gamma=cfg.gamma, max_workers=_threads())
    rows = [[label] + row.tolist() for label, row in zip(labels, mat)]
    _atomic_write(cfg.out_csv, _csv(rows, "label," + ",".join(labels)))
    return 0


def _cmd_pca(cfg: RunConfig) -> int:
    mode = _MODE_ALIASES[cfg.mode]
    if mode == "covariance":
        raise ConfigurationError("--mode cov has no vector payload to project")
    labels, sentences = _load_sentences(cfg, mode)
    coords = covdist.pca_project([s.payload for s in sentences], cfg.k)
    header = "label,x,y" if cfg.k == 2 else "label," + ",".join(f"c{i+1}" for i in range(cfg.k))
    rows = [[label] + c.tolist() for label, c in zip(labels, coords)]
    _atomic_write(cfg.out_csv, _csv(rows, header))
    return 0


def _cmd_selftest(cfg: RunConfig) -> int:
    results = selftest.run_all(seed=cfg.seed)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        line = f"ok {name}" if ok else f"FAIL {name}: {detail}"
        print(line)
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


_DISPATCH = {
    "entropy": _cmd_entropy,
    "scaling": _cmd_scaling,
    "infogain": _cmd_infogain,
    "lasso": _cmd_lasso,
    "distances": _cmd_distances,
    "pca": _cmd_pca,
    "selftest": _cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-infolab",
        description="Information-theoretic analyses of embedding tensors (EMB1 format).",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("entropy", help="log-det entropy of an embedding matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                   help="l2-normalize rows before computing (default: on)")
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("scaling", help="skill-graph scaling-law sweeps")
    p.add_argument("--sweep", choices=["skills", "params", "flops", "dataset"], required=True)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--M", dest="m", type=int, default=10**6)
    p.add_argument("--B", dest="b", type=float, default=10.0)
    p.add_argument("--C", dest="c", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--r", type=int, default=1, help="neurons per skill")
    p.add_argument("--a-const", type=float, default=1.0)
    p.add_argument("--gamma-d", dest="gamma_d", type=float, default=0.3)
    p.add_argument("--points", type=int, default=25)
    p.add_argument("--min-x", dest="min_x", type=float, default=4.0)
    p.add_argument("--max-x", dest="max_x", type=float, default=400.0)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("infogain", help="GP information gain along a token sequence")
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("lasso", help="Lasso vs attention token selection")
    p.add_argument("--input", required=True, help="EMB1 [T+1, d]; last row is the target")
    p.add_argument("--attention", default=None, help="EMB1 [H, T+1, T+1] or [L, H, T+1, T+1]")
    p.add_argument("--values", default=None, help="EMB1 [T+1, d_v] value vectors")
    p.add_argument("--sidecar", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=token_select.DEFAULT_LAMBDA)
    p.add_argument("--threshold", type=float, default=token_select.DEFAULT_THRESHOLD)
    p.add_argument("--layer", type=int, default=-1)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--beta-csv", dest="beta_csv", default=None)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("distances", help="pairwise sentence distances over a directory")
    p.add_argument("--input-dir", dest="input_dir", required=True)
    p.add_argument("--pattern", default="*.emb1")
    p.add_argument("--mode", choices=["last", "mean", "cov"], default="mean")
    p.add_argument("--metric", default="l2",
                   choices=["l2", "logdet", "js", "riemann", "loge", "frobenius"])
    p.add_argument("--gamma", type=float, default=covdist.DEFAULT_GAMMA)
    p.add_argument("--center", action="store_true")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("pca", help="PCA coordinates of sentence vectors")
    p.add_argument("--input-dir", dest="input_dir", required=True)
    p.add_argument("--pattern", default="*.emb1")
    p.add_argument("--mode", choices=["last", "mean"], default="mean")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("selftest", help="run the module invariant suite")
    p.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        cfg.validate()
        return _DISPATCH[cfg.subcommand](cfg)
    except InfolabError as e:
        print(json.dumps({"error": e.code, "detail": str(e)}), file=sys.stderr)
        return 1
    except OSError as e:
        print(json.dumps({"error": "io", "detail": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
