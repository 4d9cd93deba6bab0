"""Evaluation metrics over a dataset split.

- action token / sequence accuracy: teacher-forced policy predictions
  against the stored execution traces.
- behavior match of greedy reconstructions against the source programs on
  the stored initial states.
- latent smoothness: mean behavior match between each program and the
  decoded programs of its ten nearest latent neighbors, executed from one
  shared initial state.
"""

from __future__ import annotations

import numpy as np
import torch

from .. import dsl
from ..datagen import Split
from ..grid import random_world
from ..interpreter import execute, prefix_match_score
from .data import make_program_batch, make_rollout_batch, MaskCache
from .nets import ExecutionPolicy, ProgramVae

SMOOTHNESS_NEIGHBORS = 10


@torch.no_grad()
def encode_mu(vae: ProgramVae, split: Split, indices: list[int] | None = None,
              batch_size: int = 256) -> torch.Tensor:
    indices = list(range(len(split))) if indices is None else indices
    cache = MaskCache(dsl.VOCAB)
    out = []
    for i in range(0, len(indices), batch_size):
        chunk = indices[i:i + batch_size]
        batch = make_program_batch([split.token_ids[j] for j in chunk], cache, chunk)
        mu, _ = vae.encode(batch.enc_tokens, batch.lengths)
        out.append(mu)
    return torch.cat(out)


@torch.no_grad()
def action_accuracy(policy: ExecutionPolicy, z: torch.Tensor, split: Split,
                    indices: list[int]) -> tuple[float, float]:
    """(token accuracy, full-sequence accuracy) teacher-forced on traces."""
    batch = make_rollout_batch([split.rollouts[i] for i in indices])
    # program_index refers to positions within `indices`, matching z's rows
    logits = policy.action_logits(z[batch.program_index], batch.perceptions,
                                  batch.prev_actions)
    pred = logits.argmax(dim=-1)
    hits = (pred == batch.targets) & batch.valid
    token_acc = hits.sum().item() / max(1, batch.valid.sum().item())
    row_exact = ((hits | ~batch.valid).all(dim=1)).float()
    return token_acc, float(row_exact.mean())


@torch.no_grad()
def greedy_reconstruction_match(vae: ProgramVae, split: Split, indices: list[int],
                                exec_cap: int, batch_size: int = 128) -> tuple[float, float]:
    """(mean behavior match, exact token match rate) of greedy decodes."""
    total_match = 0.0
    exact = 0
    for i in range(0, len(indices), batch_size):
        chunk = indices[i:i + batch_size]
        mu = encode_mu(vae, split, chunk)
        decoded = vae.decode(mu, mode="greedy")
        for j, tokens in zip(chunk, decoded):
            program = dsl.parse_tokens(tokens)
            stored = split.rollouts[j]
            score = np.mean([
                prefix_match_score(
                    execute(program, r.initial_state, exec_cap).actions, r.actions)
                for r in stored]) if stored else 1.0
            total_match += float(score)
            exact += int(tokens == [dsl.VOCAB[t] for t in split.token_ids[j]])
    return total_match / len(indices), exact / len(indices)


@torch.no_grad()
def latent_smoothness(vae: ProgramVae, split: Split, exec_cap: int,
                      limit: int | None = None, world_seed: int = 1234,
                      n_neighbors: int = SMOOTHNESS_NEIGHBORS) -> float:
    indices = list(range(len(split) if limit is None else min(limit, len(split))))
    if len(indices) <= n_neighbors:
        raise ValueError("split too small for smoothness evaluation")
    mu = encode_mu(vae, split, indices).numpy()
    shared_state = random_world(np.random.default_rng(world_seed))
    decoded = []
    for i in range(0, len(indices), 256):
        decoded.extend(vae.decode(torch.from_numpy(mu[i:i + 256]), mode="greedy"))
    decoded_traces = [
        execute(dsl.parse_tokens(toks), shared_state, exec_cap).actions
        for toks in decoded]
    source_traces = [
        execute(split.programs[i], shared_state, exec_cap).actions for i in indices]
    d2 = ((mu[:, None, :] - mu[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    total = 0.0
    for row in range(len(indices)):
        neighbors = np.argpartition(d2[row], n_neighbors)[:n_neighbors]
        total += float(np.mean([
            prefix_match_score(decoded_traces[n], source_traces[row])
            for n in neighbors]))
    return total / len(indices)


@torch.no_grad()
def eval_metrics(vae: ProgramVae, policy: ExecutionPolicy, split: Split,
                 exec_cap: int = 100, include_smoothness: bool = True,
                 limit: int | None = None) -> dict[str, float]:
    indices = list(range(len(split) if limit is None else min(limit, len(split))))
    z = encode_mu(vae, split, indices)
    token_acc, seq_acc = action_accuracy(policy, z, split, indices)
    behavior, exact = greedy_reconstruction_match(vae, split, indices, exec_cap)
    out = {
        "action_token_acc": token_acc,
        "action_seq_acc": seq_acc,
        "val_behavior_match": behavior,
        "program_exact_match": exact,
    }
    if include_smoothness:
        out["smoothness"] = latent_smoothness(vae, split, exec_cap, limit=limit)
    return out
