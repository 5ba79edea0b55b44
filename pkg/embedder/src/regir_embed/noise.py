"""Token-deletion noise for denoising-autoencoder training."""

from __future__ import annotations

import random
from typing import Sequence


def delete_tokens(tokens: Sequence[str], ratio: float, rng: random.Random) -> list[str]:
    """Remove exactly round(ratio * len(tokens)) tokens, keeping order.

    The survivors appear in their original order; which tokens go is uniform
    over all subsets of the required size.
    """
    count = len(tokens)
    n_delete = round(ratio * count)
    if n_delete <= 0:
        return list(tokens)
    dropped = set(rng.sample(range(count), n_delete))
    return [tok for i, tok in enumerate(tokens) if i not in dropped]


def corrupt_text(text: str, ratio: float, rng: random.Random) -> str:
    """Whitespace-token deletion noise over a text."""
    return " ".join(delete_tokens(text.split(), ratio, rng))
