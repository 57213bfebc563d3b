import pytest
import torch
from tokenizers import Tokenizer, models, pre_tokenizers
from transformers import (
    GPT2Config,
    GPT2LMHeadModel,
    GPTNeoXConfig,
    GPTNeoXForCausalLM,
    PreTrainedTokenizerFast,
)

from embed_extractor import prompts as prompt_sets

# hidden size exceeds the longest prompt's token count so regressions on
# token representations stay in the overcomplete regime, as with real LMs
HIDDEN = 64
HEADS = 4
LAYERS = 2


def _word_tokenizer() -> PreTrainedTokenizerFast:
    text = " ".join([prompt_sets.CAPITAL_CITIES, *prompt_sets.country_prompts()])
    vocab = {"[UNK]": 0}
    pre = pre_tokenizers.Whitespace()
    for word, _ in pre.pre_tokenize_str(text):
        vocab.setdefault(word, len(vocab))
    tok = Tokenizer(models.WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    return PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]")


@pytest.fixture(scope="session")
def tiny_checkpoint(tmp_path_factory):
    """Word-level tokenizer + randomly initialized 2-layer GPT-2, saved once.

    GPT-2's additive position embeddings keep repeated tokens linearly
    separated in the residual stream, which a randomly initialized
    rotary-only model does not, so regressions on the extracted rows stay
    well conditioned -- the regime trained models live in.
    """
    path = tmp_path_factory.mktemp("tiny_gpt2")
    fast = _word_tokenizer()
    torch.manual_seed(20240613)
    config = GPT2Config(
        vocab_size=fast.vocab_size,
        n_embd=HIDDEN,
        n_layer=LAYERS,
        n_head=HEADS,
        n_inner=4 * HIDDEN,
        n_positions=128,
        bos_token_id=0,
        eos_token_id=0,
    )
    model = GPT2LMHeadModel(config).eval()
    model.save_pretrained(path)
    fast.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def tiny_neox_checkpoint(tmp_path_factory):
    """Same setup on the GPT-NeoX (Pythia) architecture, for its value layout."""
    path = tmp_path_factory.mktemp("tiny_neox")
    fast = _word_tokenizer()
    torch.manual_seed(20240613)
    config = GPTNeoXConfig(
        vocab_size=fast.vocab_size,
        hidden_size=HIDDEN,
        num_hidden_layers=LAYERS,
        num_attention_heads=HEADS,
        intermediate_size=4 * HIDDEN,
        max_position_embeddings=128,
    )
    model = GPTNeoXForCausalLM(config).eval()
    model.save_pretrained(path)
    fast.save_pretrained(path)
    return str(path)
