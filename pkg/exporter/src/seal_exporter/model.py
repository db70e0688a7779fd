"""Loading a pretrained encoder and its subword tokenizer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import torch
from transformers import AutoModel, AutoTokenizer

from seal_exporter.errors import ExportError

__all__ = ["Encoder", "load_encoder"]


@dataclass
class Encoder:
    """A frozen transformer in inference mode plus its fast tokenizer."""

    tokenizer: Any
    model: Any
    hidden_size: int
    n_layers: int
    window: int  # maximum input length including special tokens

    @property
    def dim_all_layers(self) -> int:
        return self.hidden_size * self.n_layers

    @property
    def n_specials(self) -> int:
        return self.tokenizer.num_special_tokens_to_add()


def load_encoder(name_or_path: str) -> Encoder:
    """Instantiate the encoder named by the job (a local path or model id).

    The tokenizer must be a "fast" tokenizer: subword-to-character offset
    mappings are how word alignment works.
    """
    tokenizer = AutoTokenizer.from_pretrained(name_or_path)
    if not getattr(tokenizer, "is_fast", False):
        raise ExportError(
            f"{name_or_path}: tokenizer provides no offset mappings; "
            "a fast tokenizer is required"
        )
    model = AutoModel.from_pretrained(name_or_path)
    model.eval()
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    config = model.config
    return Encoder(
        tokenizer=tokenizer,
        model=model,
        hidden_size=config.hidden_size,
        n_layers=config.num_hidden_layers,
        window=config.max_position_embeddings,
    )


def special_template(tokenizer) -> tuple[list[int], list[int]]:
    """The special-token ids framing a single sequence: (prefix, suffix).

    Derived by encoding a one-word probe and reading the special-tokens
    mask, so chunked inputs can be composed manually for any tokenizer
    that frames content with a fixed prefix and suffix.
    """
    probe = tokenizer("a", add_special_tokens=True, return_special_tokens_mask=True)
    ids, mask = probe["input_ids"], probe["special_tokens_mask"]
    if 0 not in mask:
        raise ExportError("cannot infer the tokenizer's special-token template")
    first = mask.index(0)
    last = len(mask) - 1 - mask[::-1].index(0)
    if 1 in mask[first : last + 1]:
        raise ExportError("special tokens interleave with content; unsupported")
    return ids[:first], ids[last + 1 :]


@torch.no_grad()
def hidden_states(encoder: Encoder, input_ids: list[int]) -> tuple:
    """All layer activations for one chunk, as a tuple of (1, T, H) tensors.

    Index 0 is the embedding layer output; indices 1..n_layers are the
    transformer layers.
    """
    batch = torch.tensor([input_ids], dtype=torch.long)
    output = encoder.model(batch, output_hidden_states=True)
    return output.hidden_states
