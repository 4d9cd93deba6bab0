"""The three training losses: token reconstruction, behavior matching via
score-function gradients, and action imitation through the execution policy."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .. import dsl
from ..datagen import StoredRollout
from ..interpreter import execute, prefix_match_score
from .data import ProgramBatch, RolloutBatch
from .nets import ExecutionPolicy, ProgramVae


@dataclass
class LossParts:
    loss: torch.Tensor
    token_accuracy: float = 0.0
    mean_reward: float = 0.0


def gaussian_kl(mu: torch.Tensor, log_sigma: torch.Tensor) -> torch.Tensor:
    """KL(q || standard normal) per row, summed over latent dims."""
    return -0.5 * torch.sum(1 + 2 * log_sigma - mu ** 2 - torch.exp(2 * log_sigma),
                            dim=-1)


def program_loss(vae: ProgramVae, batch: ProgramBatch, z: torch.Tensor,
                 mu: torch.Tensor, log_sigma: torch.Tensor, beta: float) -> LossParts:
    """Masked teacher-forced token NLL plus the weighted KL term."""
    logits = vae.decode_logits(z, batch.dec_inputs)
    log_dist = torch.log_softmax(logits + batch.masks, dim=-1)
    pad_row = batch.targets.eq(dsl.PAD)
    safe_targets = batch.targets.masked_fill(pad_row, 0)
    token_logp = log_dist.gather(-1, safe_targets.unsqueeze(-1)).squeeze(-1)
    token_logp = token_logp.masked_fill(pad_row, 0.0)
    nll = -token_logp.sum(dim=1)
    kl = gaussian_kl(mu, log_sigma)
    loss = (nll + beta * kl).mean()
    with torch.no_grad():
        pred = log_dist.argmax(dim=-1)
        hits = (pred == batch.targets) & ~pad_row
        acc = hits.sum().item() / max(1, (~pad_row).sum().item())
    return LossParts(loss, token_accuracy=acc)


def latent_behavior_loss(policy: ExecutionPolicy, z: torch.Tensor,
                         rollouts: RolloutBatch) -> LossParts:
    """Cross-entropy of policy action predictions against stored traces.

    Summed over each trace, averaged over all (program, rollout) rows;
    gradients reach both the policy and the encoder through z.
    """
    z_rows = z[rollouts.program_index]
    logits = policy.action_logits(z_rows, rollouts.perceptions, rollouts.prev_actions)
    log_dist = torch.log_softmax(logits, dim=-1)
    safe_targets = rollouts.targets.clamp(min=0)
    token_logp = log_dist.gather(-1, safe_targets.unsqueeze(-1)).squeeze(-1)
    token_logp = token_logp.masked_fill(~rollouts.valid, 0.0)
    loss = (-token_logp.sum(dim=1)).mean()
    with torch.no_grad():
        pred = log_dist.argmax(dim=-1)
        hits = (pred == rollouts.targets) & rollouts.valid
        acc = hits.sum().item() / max(1, rollouts.valid.sum().item())
    return LossParts(loss, token_accuracy=acc)


def decoded_behavior_rewards(token_lists: list[list[str]],
                             rollout_lists: list[list[StoredRollout]],
                             exec_cap: int) -> torch.Tensor:
    """Behavior-match reward of each decoded program against its source.

    The stored rollouts provide both the initial states and the source
    program's traces on them, so only the decoded program is executed.
    """
    rewards = []
    for tokens, stored in zip(token_lists, rollout_lists):
        program = dsl.parse_tokens(tokens)
        total = 0.0
        for rollout in stored:
            trace = execute(program, rollout.initial_state, exec_cap).actions
            total += prefix_match_score(trace, rollout.actions)
        rewards.append(total / max(1, len(stored)))
    return torch.tensor(rewards, dtype=torch.float32)


def behavior_loss(vae: ProgramVae, z: torch.Tensor,
                  rollout_lists: list[list[StoredRollout]], baseline: float,
                  exec_cap: int, generator: torch.Generator | None = None) -> LossParts:
    """Score-function estimate of the negative expected behavior match.

    One sampled decode per program; the reward is centered by a moving
    baseline, and gradients flow through the token log-probabilities into
    the decoder and, via z, the encoder.
    """
    token_lists, log_probs = vae.decode_with_log_prob(z, generator=generator)
    with torch.no_grad():
        rewards = decoded_behavior_rewards(token_lists, rollout_lists, exec_cap)
    advantage = rewards - baseline
    loss = (-advantage * log_probs).mean()
    return LossParts(loss, mean_reward=float(rewards.mean()))
