"""Token-deletion noise: exact counts, order, determinism."""

import random

from regir_embed import corrupt_text, delete_tokens


def test_exact_deletion_count_across_lengths_and_ratios():
    for ratio in (0.3, 0.5, 0.9):
        for length in range(0, 41):
            tokens = [f"t{i}" for i in range(length)]
            kept = delete_tokens(tokens, ratio, random.Random(7))
            assert len(tokens) - len(kept) == round(ratio * length)


def test_survivor_order_preserved():
    tokens = [f"t{i}" for i in range(30)]
    kept = delete_tokens(tokens, 0.5, random.Random(3))
    indices = [int(t[1:]) for t in kept]
    assert indices == sorted(indices)


def test_deterministic_given_seed():
    tokens = [f"t{i}" for i in range(20)]
    assert delete_tokens(tokens, 0.5, random.Random(9)) == delete_tokens(
        tokens, 0.5, random.Random(9)
    )


def test_zero_round_keeps_everything():
    # round(0.5 * 1) == 0 under banker's rounding
    assert delete_tokens(["only"], 0.5, random.Random(0)) == ["only"]


def test_corrupt_text_wraps_whitespace_tokens():
    text = "a b c d e f g h"
    noisy = corrupt_text(text, 0.5, random.Random(1))
    assert len(noisy.split()) == 4
    assert all(tok in text.split() for tok in noisy.split())
