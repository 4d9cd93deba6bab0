"""Recurrent program autoencoder and latent-conditioned execution policy.

The encoder is a GRU over token embeddings with two affine heads producing
the posterior mean and log standard deviation. The decoder is a GRU that
consumes the previous token's embedding concatenated with the latent vector
and emits token logits, to which the grammar mask is added before
normalization, so sampled and greedy decodes are syntactically valid by
construction. The execution policy is a GRU over (latent, perception,
previous action) followed by a small MLP producing action logits; it serves
only as a training signal for shaping the latent space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .. import syntax
from ..dsl import END, PAD, START, VOCAB, VOCAB_SIZE
from ..grid import ACTIONS

N_ACTIONS = len(ACTIONS)
# Policy input: one-hot of the previous action plus a start slot.
PREV_ACTION_DIM = N_ACTIONS + 1
PERCEPTION_DIM = 5


@dataclass(frozen=True)
class ModelDims:
    embed: int = 64
    hidden: int = 64
    latent: int = 64


class ProgramVae(nn.Module):
    """Token-sequence encoder/decoder with a Gaussian latent.

    `token_dropout` blanks a fraction of the decoder's previous-token inputs
    during training (teacher forcing only), which keeps the decoder from
    modelling programs unconditionally and ignoring the latent.
    """

    def __init__(self, dims: ModelDims, token_dropout: float = 0.0):
        super().__init__()
        self.dims = dims
        self.token_dropout = token_dropout
        self.embedding = nn.Embedding(VOCAB_SIZE, dims.embed, padding_idx=PAD)
        self.encoder_gru = nn.GRU(dims.embed, dims.hidden, batch_first=True)
        self.mu_head = nn.Linear(dims.hidden, dims.latent)
        self.log_sigma_head = nn.Linear(dims.hidden, dims.latent)
        self.latent_to_hidden = nn.Linear(dims.latent, dims.hidden)
        self.decoder_gru = nn.GRU(dims.embed + dims.latent, dims.hidden,
                                  batch_first=True)
        # The head sees the latent directly so token choices do not have to
        # squeeze through the recurrent state alone.
        self.token_head = nn.Linear(dims.hidden + dims.latent, VOCAB_SIZE)

    # --- encoder ---

    def encode(self, tokens: torch.Tensor, lengths: torch.Tensor
               ) -> tuple[torch.Tensor, torch.Tensor]:
        """Posterior (mu, log_sigma) for a padded batch of token ids."""
        embedded = self.embedding(tokens)
        outputs, _ = self.encoder_gru(embedded)
        last = outputs[torch.arange(len(tokens)), lengths - 1]
        return self.mu_head(last), self.log_sigma_head(last)

    def reparameterize(self, mu: torch.Tensor, log_sigma: torch.Tensor,
                       generator: torch.Generator | None = None) -> torch.Tensor:
        eps = torch.empty_like(mu).normal_(generator=generator)
        return mu + torch.exp(log_sigma) * eps

    # --- decoder ---

    def _decoder_init(self, z: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.latent_to_hidden(z)).unsqueeze(0)

    def decode_logits(self, z: torch.Tensor, inputs: torch.Tensor) -> torch.Tensor:
        """Teacher-forced unmasked logits; `inputs` are previous-token ids."""
        embedded = self.embedding(inputs)
        if self.training and self.token_dropout > 0.0:
            keep = (torch.rand(inputs.shape, device=embedded.device)
                    >= self.token_dropout).to(embedded.dtype)
            embedded = embedded * keep.unsqueeze(-1)
        conditioned = torch.cat(
            [embedded, z.unsqueeze(1).expand(-1, inputs.shape[1], -1)], dim=-1)
        outputs, _ = self.decoder_gru(conditioned, self._decoder_init(z))
        return self.token_head(torch.cat(
            [outputs, z.unsqueeze(1).expand(-1, inputs.shape[1], -1)], dim=-1))

    @torch.no_grad()
    def decode(self, z: torch.Tensor, mode: str = "greedy",
               generator: torch.Generator | None = None,
               max_tokens: int = syntax.MAX_PROGRAM_TOKENS) -> list[list[str]]:
        """Autoregressive grammar-masked decoding; returns token lists."""
        outputs, _ = self._decode_autoregressive(z, mode, generator, max_tokens)
        return outputs

    def decode_with_log_prob(self, z: torch.Tensor,
                             generator: torch.Generator | None = None,
                             max_tokens: int = syntax.MAX_PROGRAM_TOKENS
                             ) -> tuple[list[list[str]], torch.Tensor]:
        """Sampled decoding keeping the token log-probability sum per row.

        The log-probabilities stay attached to the graph (through both the
        decoder weights and the conditioning on z) for score-function
        training.
        """
        return self._decode_autoregressive(z, "sample", generator, max_tokens)

    def _decode_autoregressive(self, z, mode, generator, max_tokens):
        batch = z.shape[0]
        device = z.device
        states = [syntax.mask_init(max_tokens) for _ in range(batch)]
        done = [False] * batch
        tokens: list[list[str]] = [[] for _ in range(batch)]
        log_prob_sum = torch.zeros(batch, device=device)
        prev = torch.full((batch,), START, dtype=torch.long, device=device)
        hidden = self._decoder_init(z)
        # Program tokens plus the closing end-of-sequence step.
        for _ in range(max_tokens + 1):
            if all(done):
                break
            embedded = self.embedding(prev)
            step_in = torch.cat([embedded, z], dim=-1).unsqueeze(1)
            out, hidden = self.decoder_gru(step_in, hidden)
            logits = self.token_head(torch.cat([out.squeeze(1), z], dim=-1))
            mask = torch.from_numpy(
                np.stack([syntax.legal_mask(s) for s in states])).to(device)
            log_dist = torch.log_softmax(logits + mask, dim=-1)
            if mode == "greedy":
                chosen = log_dist.argmax(dim=-1)
            else:
                chosen = torch.multinomial(
                    log_dist.exp(), 1, generator=generator).squeeze(1)
            active = torch.tensor([not d for d in done], device=device)
            chosen = torch.where(active, chosen, torch.full_like(chosen, PAD))
            step_logp = log_dist.gather(1, chosen.unsqueeze(1)).squeeze(1)
            log_prob_sum = log_prob_sum + torch.where(
                active, step_logp, torch.zeros_like(step_logp))
            for i in range(batch):
                if done[i]:
                    continue
                idx = int(chosen[i])
                states[i] = syntax.mask_step(states[i], VOCAB[idx])
                if idx == END:
                    done[i] = True
                else:
                    tokens[i].append(VOCAB[idx])
            prev = chosen
        return tokens, log_prob_sum


class ExecutionPolicy(nn.Module):
    """Predicts the next environment action from (z, perception, last action)."""

    def __init__(self, dims: ModelDims):
        super().__init__()
        self.dims = dims
        in_dim = dims.latent + PERCEPTION_DIM + PREV_ACTION_DIM
        self.gru = nn.GRU(in_dim, dims.hidden, batch_first=True)
        self.mlp = nn.Sequential(
            nn.Linear(dims.hidden, dims.hidden), nn.Tanh(),
            nn.Linear(dims.hidden, dims.hidden), nn.Tanh(),
            nn.Linear(dims.hidden, N_ACTIONS),
        )

    def action_logits(self, z: torch.Tensor, perceptions: torch.Tensor,
                      prev_actions: torch.Tensor) -> torch.Tensor:
        """Teacher-forced logits.

        z: (B, latent); perceptions: (B, T, 5); prev_actions: (B, T) ids in
        [0, N_ACTIONS] where N_ACTIONS marks the start-of-trace slot.
        """
        prev_onehot = torch.nn.functional.one_hot(
            prev_actions, PREV_ACTION_DIM).to(z.dtype)
        steps = perceptions.shape[1]
        inputs = torch.cat(
            [z.unsqueeze(1).expand(-1, steps, -1), perceptions, prev_onehot], dim=-1)
        outputs, _ = self.gru(inputs)
        return self.mlp(outputs)
