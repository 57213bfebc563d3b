"""Pull hidden states, attention weights and value vectors from a causal LM.

One prompt produces up to three tensors plus a token sidecar:

    prompt_i.hidden.emb1   [T, d]      residual-stream rows at the chosen layer
    prompt_i.attn.emb1     [H, T, T]   per-head causal attention, rows re-normalized
    prompt_i.values.emb1   [T, H*dh]   concatenated per-head value vectors
    prompt_i.tokens.json   token strings + run metadata

Everything is validated against the analysis core's invariants before it
is written: shapes, finiteness, unit hidden rows (when normalization is
on) and row-stochastic lower-triangular attention.  Extraction is
deterministic: eval mode, no sampling, prompts processed sequentially on
a single thread.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModelForCausalLM, AutoTokenizer

from . import emb1

WHAT_CHOICES = ("hidden", "attention", "values")
ATTENTION_ROW_TOL = 1e-5


class ExtractionError(RuntimeError):
    pass


@dataclass
class ExtractionJob:
    model_id: str
    prompts: list[str]
    layer: int = -1
    outputs: str = "out"
    what: tuple[str, ...] = ("hidden", "attention", "values")
    normalize_hidden: bool = True
    final_norm: str = "pre"  # or "post": apply the model's final layer norm
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.prompts:
            raise ExtractionError("prompts must be non-empty")
        bad = set(self.what) - set(WHAT_CHOICES)
        if bad:
            raise ExtractionError(f"unknown extraction targets: {sorted(bad)}")
        if self.final_norm not in ("pre", "post"):
            raise ExtractionError(f"final_norm must be 'pre' or 'post', got {self.final_norm}")


def _resolve_layer(layer: int, depth: int) -> int:
    resolved = layer if layer >= 0 else depth + layer
    if not 0 <= resolved < depth:
        raise ExtractionError(f"layer {layer} outside model depth {depth}")
    return resolved


def _value_hook_target(model):
    """The module whose output carries the packed qkv projection."""
    kind = model.config.model_type
    if kind == "gpt_neox":
        return lambda block: block.attention.query_key_value, "per_head"
    if kind == "gpt2":
        return lambda block: block.attn.c_attn, "stacked"
    raise ExtractionError(f"value extraction not implemented for model type {kind!r}")


def _blocks(model):
    kind = model.config.model_type
    if kind == "gpt_neox":
        return model.gpt_neox.layers, model.gpt_neox.final_layer_norm
    if kind == "gpt2":
        return model.transformer.h, model.transformer.ln_f
    for attr in ("model", "transformer"):
        trunk = getattr(model, attr, None)
        if trunk is not None and hasattr(trunk, "layers"):
            return trunk.layers, getattr(trunk, "norm", None)
    raise ExtractionError(f"cannot locate transformer blocks for {model.config.model_type!r}")


def _split_values(qkv: torch.Tensor, layout: str, heads: int) -> torch.Tensor:
    t, width = qkv.shape
    per = width // 3
    if layout == "stacked":
        return qkv[:, 2 * per:]
    head_size = per // heads
    return qkv.view(t, heads, 3 * head_size)[:, :, 2 * head_size:].reshape(t, heads * head_size)


def _validate_hidden(arr: np.ndarray, normalized: bool) -> None:
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise ExtractionError("hidden tensor must be a finite [T, d] matrix")
    if normalized:
        norms = np.linalg.norm(arr, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ExtractionError("hidden rows not unit norm after normalization")


def _validate_attention(arr: np.ndarray) -> None:
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ExtractionError("attention tensor must be [H, T, T]")
    if np.any(arr < 0) or np.max(np.abs(np.triu(arr, k=1))) > 0:
        raise ExtractionError("attention must be non-negative and causal")
    if np.max(np.abs(arr.sum(axis=2) - 1.0)) > ATTENTION_ROW_TOL:
        raise ExtractionError("attention rows not stochastic within 1e-5")


def extract(job: ExtractionJob) -> list[dict]:
    """Run the job; returns one manifest entry per prompt with the paths written."""
    torch.set_num_threads(1)  # bitwise run-to-run determinism
    try:
        model = AutoModelForCausalLM.from_pretrained(
            job.model_id, attn_implementation="eager"
        ).eval()
        tokenizer = AutoTokenizer.from_pretrained(job.model_id)
    except Exception as e:
        raise ExtractionError(f"cannot load checkpoint {job.model_id!r}: {e}") from e

    blocks, final_norm = _blocks(model)
    block = _resolve_layer(job.layer, len(blocks))
    out_dir = Path(job.outputs)
    out_dir.mkdir(parents=True, exist_ok=True)

    hook_state: dict[str, torch.Tensor] = {}
    handles = []
    if "values" in job.what:
        target, layout = _value_hook_target(model)
        handles.append(
            target(blocks[block]).register_forward_hook(
                lambda mod, inp, out: hook_state.__setitem__("qkv", out.detach())
            )
        )
    # HF convention: the last hidden_states entry is already post-final-norm,
    # so the pre-norm stream of the last block is only visible to a pre-hook
    if final_norm is not None:
        handles.append(
            final_norm.register_forward_pre_hook(
                lambda mod, inp: hook_state.__setitem__("pre_norm", inp[0].detach())
            )
        )

    manifest = []
    try:
        for i, prompt in enumerate(job.prompts):
            encoded = tokenizer(prompt, return_tensors="pt")
            ids = encoded["input_ids"]
            if ids.numel() == 0:
                raise ExtractionError(f"prompt {i} tokenizes to nothing: {prompt!r}")
            tokens = tokenizer.convert_ids_to_tokens(ids[0])
            with torch.no_grad():
                out = model(
                    **encoded, output_hidden_states=True, output_attentions=True
                )
            entry = {"prompt_index": i, "prompt": prompt, "tokens": len(tokens)}
            stem = out_dir / f"prompt_{i:03d}"
            meta = {
                "model_id": job.model_id,
                "layer": str(job.layer),
                "resolved_block": str(block),
                "prompt": prompt,
                "normalized": str(job.normalize_hidden).lower(),
                "final_norm": job.final_norm,
                **job.meta,
            }

            if "hidden" in job.what:
                if block == len(blocks) - 1 and final_norm is not None:
                    if job.final_norm == "post":
                        states = out.hidden_states[-1]
                    else:
                        states = hook_state.pop("pre_norm")
                else:
                    states = out.hidden_states[block + 1]
                    if job.final_norm == "post":
                        if final_norm is None:
                            raise ExtractionError("model exposes no final layer norm")
                        with torch.no_grad():
                            states = final_norm(states)
                hidden = states[0].to(torch.float64).numpy()
                if job.normalize_hidden:
                    norms = np.linalg.norm(hidden, axis=1, keepdims=True)
                    if np.any(norms == 0.0):
                        raise ExtractionError(f"prompt {i}: zero hidden row")
                    hidden = hidden / norms
                _validate_hidden(hidden, job.normalize_hidden)
                emb1.write_array(stem.with_suffix(".hidden.emb1"), hidden)
                entry["hidden"] = str(stem.with_suffix(".hidden.emb1"))

            if "attention" in job.what:
                att = out.attentions[block][0].to(torch.float64).numpy()
                att = np.tril(att)  # re-assert causality, then re-normalize rows
                att = att / att.sum(axis=2, keepdims=True)
                _validate_attention(att)
                emb1.write_array(stem.with_suffix(".attn.emb1"), att)
                entry["attention"] = str(stem.with_suffix(".attn.emb1"))

            if "values" in job.what:
                qkv = hook_state.pop("qkv", None)
                if qkv is None:
                    raise ExtractionError("value hook captured nothing")
                values = _split_values(qkv[0].to(torch.float64), layout, model.config.num_attention_heads)
                emb1.write_array(stem.with_suffix(".values.emb1"), values.numpy())
                entry["values"] = str(stem.with_suffix(".values.emb1"))

            emb1.write_sidecar(stem.with_suffix(".tokens.json"), tokens, meta)
            entry["sidecar"] = str(stem.with_suffix(".tokens.json"))
            manifest.append(entry)
    except ExtractionError as e:
        raise ExtractionError(f"prompt {len(manifest)}: {e}") from e
    finally:
        for handle in handles:
            handle.remove()
    return manifest


def make_fixture(out_dir, fixture_dir, max_dim: int) -> list[str]:
    """Truncate extracted hidden/value dims to max_dim for committable fixtures.

    Keeps the first components, re-normalizes hidden rows, copies
    attention unchanged, and records the truncation in the sidecar meta.
    """
    out_dir, fixture_dir = Path(out_dir), Path(fixture_dir)
    fixture_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for hidden_path in sorted(out_dir.glob("*.hidden.emb1")):
        arr = emb1.read_array(hidden_path)
        if max_dim > arr.shape[1]:
            raise ExtractionError(f"max_dim {max_dim} exceeds hidden dim {arr.shape[1]}")
        trunc = np.array(arr[:, :max_dim])
        norms = np.linalg.norm(trunc, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ExtractionError(f"{hidden_path.name}: truncation produced a zero row")
        emb1.write_array(fixture_dir / hidden_path.name, trunc / norms)
        written.append(hidden_path.name)
        stem = hidden_path.name.replace(".hidden.emb1", "")
        values_path = out_dir / f"{stem}.values.emb1"
        if values_path.exists():
            vals = emb1.read_array(values_path)
            emb1.write_array(fixture_dir / values_path.name, np.array(vals[:, :max_dim]))
            written.append(values_path.name)
        attn_path = out_dir / f"{stem}.attn.emb1"
        if attn_path.exists():
            emb1.write_array(fixture_dir / attn_path.name, emb1.read_array(attn_path))
            written.append(attn_path.name)
        sidecar_path = out_dir / f"{stem}.tokens.json"
        tokens, meta = emb1.read_sidecar(sidecar_path)
        meta["truncated_to"] = str(max_dim)
        emb1.write_sidecar(fixture_dir / sidecar_path.name, tokens, meta)
        written.append(sidecar_path.name)
    if not written:
        raise ExtractionError(f"no extracted tensors under {out_dir}")
    return written
