"""Tensor batch preparation for training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .. import syntax
from ..datagen import StoredRollout
from ..dsl import END, PAD, START
from .nets import N_ACTIONS


@dataclass
class ProgramBatch:
    """Padded program token tensors plus per-step grammar masks."""

    enc_tokens: torch.Tensor  # (B, L) program tokens, PAD-padded
    lengths: torch.Tensor  # (B,)
    dec_inputs: torch.Tensor  # (B, L+1) START followed by program tokens
    targets: torch.Tensor  # (B, L+1) program tokens followed by END, PAD-padded
    masks: torch.Tensor  # (B, L+1, V) additive grammar masks per target step


def step_masks(token_ids: list[int], vocab: tuple[str, ...]) -> np.ndarray:
    """Grammar mask before each target position (tokens then END)."""
    state = syntax.mask_init()
    rows = [syntax.legal_mask(state)]
    for tid in token_ids:
        state = syntax.mask_step(state, vocab[tid])
        rows.append(syntax.legal_mask(state))
    return np.stack(rows)  # (n+1, V)


class MaskCache:
    """Per-program mask arrays, computed once and reused across epochs."""

    def __init__(self, vocab: tuple[str, ...]):
        self.vocab = vocab
        self._cache: dict[int, np.ndarray] = {}

    def get(self, key: int, token_ids: list[int]) -> np.ndarray:
        found = self._cache.get(key)
        if found is None:
            found = step_masks(token_ids, self.vocab)
            self._cache[key] = found
        return found


def make_program_batch(token_id_lists: list[list[int]], mask_cache: MaskCache,
                       keys: list[int]) -> ProgramBatch:
    batch = len(token_id_lists)
    max_len = max(len(t) for t in token_id_lists)
    vocab_size = mask_cache.get(keys[0], token_id_lists[0]).shape[1]
    enc = np.full((batch, max_len), PAD, dtype=np.int64)
    dec_in = np.full((batch, max_len + 1), PAD, dtype=np.int64)
    targets = np.full((batch, max_len + 1), PAD, dtype=np.int64)
    masks = np.zeros((batch, max_len + 1, vocab_size), dtype=np.float32)
    lengths = np.zeros(batch, dtype=np.int64)
    for i, ids in enumerate(token_id_lists):
        n = len(ids)
        lengths[i] = n
        enc[i, :n] = ids
        dec_in[i, 0] = START
        dec_in[i, 1:n + 1] = ids
        targets[i, :n] = ids
        targets[i, n] = END
        masks[i, :n + 1] = mask_cache.get(keys[i], ids)
    return ProgramBatch(
        enc_tokens=torch.from_numpy(enc),
        lengths=torch.from_numpy(lengths),
        dec_inputs=torch.from_numpy(dec_in),
        targets=torch.from_numpy(targets),
        masks=torch.from_numpy(masks),
    )


@dataclass
class RolloutBatch:
    """Flattened (program, rollout) execution traces for the policy."""

    program_index: torch.Tensor  # (N,) row -> index into the batch's programs
    perceptions: torch.Tensor  # (N, T, 5) float
    prev_actions: torch.Tensor  # (N, T) ids; N_ACTIONS = start-of-trace
    targets: torch.Tensor  # (N, T) action ids, -1 where padded
    valid: torch.Tensor  # (N, T) bool

    @property
    def n_rows(self) -> int:
        return self.perceptions.shape[0]


def make_rollout_batch(rollout_lists: list[list[StoredRollout]]) -> RolloutBatch:
    rows = [(i, r) for i, rollouts in enumerate(rollout_lists) for r in rollouts
            if r.actions]
    if not rows:
        raise ValueError("batch contains no non-empty rollouts")
    max_len = max(len(r.actions) for _, r in rows)
    n = len(rows)
    perceptions = np.zeros((n, max_len, 5), dtype=np.float32)
    prev_actions = np.full((n, max_len), N_ACTIONS, dtype=np.int64)
    targets = np.full((n, max_len), -1, dtype=np.int64)
    valid = np.zeros((n, max_len), dtype=bool)
    program_index = np.zeros(n, dtype=np.int64)
    for row, (i, rollout) in enumerate(rows):
        m = len(rollout.actions)
        program_index[row] = i
        perceptions[row, :m] = np.asarray(rollout.perceptions, dtype=np.float32)
        prev_actions[row, 1:m] = rollout.actions[:-1]
        targets[row, :m] = rollout.actions
        valid[row, :m] = True
    return RolloutBatch(
        program_index=torch.from_numpy(program_index),
        perceptions=torch.from_numpy(perceptions),
        prev_actions=torch.from_numpy(prev_actions),
        targets=torch.from_numpy(targets),
        valid=torch.from_numpy(valid),
    )
