"""Command line front end: extract activations for a prompt file."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .extract import ExtractionError, ExtractionJob, extract, make_fixture
from . import prompts as prompt_sets


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-extract",
        description="Dump causal-LM hidden states / attention / values as EMB1 tensors.",
    )
    parser.add_argument("--model", required=True, help="checkpoint id or local path")
    parser.add_argument("--layer", type=int, default=-1, help="block index, negative from end")
    parser.add_argument("--what", default="hidden,attention",
                        help="comma list from {hidden,attention,values}")
    parser.add_argument("--out", required=True)
    parser.add_argument("--prompts-file", default=None,
                        help="one prompt per line; omit with --preset")
    parser.add_argument("--preset", choices=["capitals", "countries"], default=None,
                        help="built-in prompt sets for the controlled experiments")
    parser.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True,
                        help="l2-normalize hidden rows (default: on)")
    parser.add_argument("--final-norm", choices=["pre", "post"], default="pre")
    parser.add_argument("--fixture-dim", type=int, default=None,
                        help="also write a dimension-truncated fixture copy")
    parser.add_argument("--fixture-out", default=None)
    return parser


def load_prompts(args) -> list[str]:
    if args.preset == "capitals":
        return [prompt_sets.CAPITAL_CITIES]
    if args.preset == "countries":
        return prompt_sets.country_prompts()
    if not args.prompts_file:
        raise ExtractionError("need --prompts-file or --preset")
    lines = Path(args.prompts_file).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip()]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExtractionJob(
            model_id=args.model,
            prompts=load_prompts(args),
            layer=args.layer,
            outputs=args.out,
            what=tuple(w.strip() for w in args.what.split(",") if w.strip()),
            normalize_hidden=args.normalize,
            final_norm=args.final_norm,
        )
        manifest = extract(job)
        if args.fixture_dim is not None:
            fixture_out = args.fixture_out or str(Path(args.out) / "fixture")
            make_fixture(args.out, fixture_out, args.fixture_dim)
        print(json.dumps({"prompts": len(manifest), "out": args.out}))
        return 0
    except ExtractionError as e:
        print(json.dumps({"error": "extraction", "detail": str(e)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
