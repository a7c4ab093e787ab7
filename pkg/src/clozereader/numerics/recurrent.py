"""Gated recurrent cells and bidirectional multi-layer encoders.

One step of the cell, for input x and state h:

    r  = sigmoid(x W_r + h U_r + b_r)
    z  = sigmoid(x W_z + h U_z + b_z)
    h~ = tanh(x W + (r * h) U + b)
    h' = (1 - z) * h + z * h~

The three input projections are stored fused as one (in, 3H) matrix so a
whole sequence can be projected with a single matrix product up front.
Sequences are processed as flattened (T*B, D) blocks in time-major order;
a per-step 0/1 mask freezes the state of finished rows, which keeps both
the per-position outputs and the final states of shorter rows correct
under right-padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .init import orthogonal_init
from .tensor import (
    Parameter,
    ShapeMismatchError,
    Tensor,
    add,
    concat,
    matmul,
    mul,
    reshape,
    sigmoid,
    slice_cols,
    slice_rows,
    tanh,
)


@dataclass
class GruWeights:
    """One direction of one layer."""

    w: Parameter    # (in_dim, 3H), gate order: reset, update, candidate
    u_r: Parameter  # (H, H)
    u_z: Parameter  # (H, H)
    u_c: Parameter  # (H, H)
    b: Parameter    # (3H,)

    @property
    def hidden(self) -> int:
        return self.u_r.data.shape[0]

    @property
    def in_dim(self) -> int:
        return self.w.data.shape[0]

    def parameters(self) -> list[Parameter]:
        return [self.w, self.u_r, self.u_z, self.u_c, self.b]


def init_gru_weights(in_dim: int, hidden: int, rng_seed: int, name: str) -> GruWeights:
    """Orthogonal gate blocks, zero biases."""
    blocks = [
        orthogonal_init((in_dim, hidden), rng_seed + offset) for offset in range(3)
    ]
    return GruWeights(
        w=Parameter(np.concatenate(blocks, axis=1), name=f"{name}.w"),
        u_r=Parameter(orthogonal_init((hidden, hidden), rng_seed + 3), name=f"{name}.u_r"),
        u_z=Parameter(orthogonal_init((hidden, hidden), rng_seed + 4), name=f"{name}.u_z"),
        u_c=Parameter(orthogonal_init((hidden, hidden), rng_seed + 5), name=f"{name}.u_c"),
        b=Parameter(np.zeros(3 * hidden), name=f"{name}.b"),
    )


def _step(xw: Tensor, h: Tensor, weights: GruWeights) -> Tensor:
    """One cell step given the precomputed input projection xw = x W + b."""
    hidden = weights.hidden
    r = sigmoid(add(slice_cols(xw, 0, hidden), matmul(h, weights.u_r)))
    z = sigmoid(add(slice_cols(xw, hidden, 2 * hidden), matmul(h, weights.u_z)))
    candidate = tanh(
        add(slice_cols(xw, 2 * hidden, 3 * hidden), matmul(mul(r, h), weights.u_c))
    )
    return add(mul(1.0 - z, h), mul(z, candidate))


def gru_cell(x: Tensor, h: Tensor, weights: GruWeights) -> Tensor:
    """Single step for a single input: x (in,) or (B, in), h likewise."""
    squeeze = x.data.ndim == 1
    if squeeze:
        x = reshape(x, (1, -1))
        h = reshape(h, (1, -1))
    xw = add(matmul(x, weights.w), weights.b)
    out = _step(xw, h, weights)
    if squeeze:
        out = reshape(out, (-1,))
    return out


def run_direction(
    xw_all: Tensor,
    steps: int,
    batch: int,
    weights: GruWeights,
    h0: Tensor | None = None,
    step_masks: list[np.ndarray] | None = None,
    reverse: bool = False,
) -> tuple[list[Tensor], Tensor]:
    """Run one direction over a time-major (T*B, 3H) projected block.

    Returns per-step states in natural time order plus the loop-end state
    (the state at the last real token of every row, thanks to masking).
    """
    if steps == 0:
        raise ShapeMismatchError("empty sequence")
    h = h0 if h0 is not None else Tensor(np.zeros((batch, weights.hidden)))
    outputs: list[Tensor | None] = [None] * steps
    order = range(steps - 1, -1, -1) if reverse else range(steps)
    for t in order:
        xw = slice_rows(xw_all, t * batch, (t + 1) * batch)
        h_new = _step(xw, h, weights)
        if step_masks is not None:
            mask = step_masks[t]
            if mask.all():
                h = h_new
            else:
                h = add(mul(h_new, Tensor(mask)), mul(h, Tensor(1.0 - mask)))
        else:
            h = h_new
        outputs[t] = h
    return outputs, h  # type: ignore[return-value]


class BiGru:
    """Stacked bidirectional encoder.

    Layer k feeds layer k+1 the per-step concatenation of its forward and
    backward states, so every layer above the first reads 2H-wide inputs.
    """

    def __init__(self, in_dim: int, hidden: int, n_layers: int, rng_seed: int, name: str):
        if n_layers < 1:
            raise ValueError("need at least one layer")
        self.hidden = hidden
        self.layers: list[tuple[GruWeights, GruWeights]] = []
        dim = in_dim
        for k in range(n_layers):
            fwd = init_gru_weights(dim, hidden, rng_seed + 100 * k, f"{name}.l{k}.fwd")
            bwd = init_gru_weights(dim, hidden, rng_seed + 100 * k + 50, f"{name}.l{k}.bwd")
            self.layers.append((fwd, bwd))
            dim = 2 * hidden

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for fwd, bwd in self.layers:
            params.extend(fwd.parameters())
            params.extend(bwd.parameters())
        return params

    def run(
        self,
        flat: Tensor,
        steps: int,
        batch: int,
        step_masks: list[np.ndarray] | None = None,
        init_states: list[tuple[Tensor, Tensor]] | None = None,
    ) -> tuple[list[Tensor], list[tuple[Tensor, Tensor]]]:
        """Encode a time-major (T*B, D) block.

        Returns the last layer's per-step (B, 2H) outputs and, per layer,
        the final forward and backward states.
        """
        if steps == 0:
            raise ShapeMismatchError("empty sequence")
        finals: list[tuple[Tensor, Tensor]] = []
        per_step: list[Tensor] = []
        for k, (fwd, bwd) in enumerate(self.layers):
            h0_fwd = init_states[k][0] if init_states is not None else None
            h0_bwd = init_states[k][1] if init_states is not None else None
            xw_fwd = add(matmul(flat, fwd.w), fwd.b)
            xw_bwd = add(matmul(flat, bwd.w), bwd.b)
            outs_fwd, final_fwd = run_direction(
                xw_fwd, steps, batch, fwd, h0_fwd, step_masks, reverse=False
            )
            outs_bwd, final_bwd = run_direction(
                xw_bwd, steps, batch, bwd, h0_bwd, step_masks, reverse=True
            )
            per_step = [
                concat([f, b], axis=1) for f, b in zip(outs_fwd, outs_bwd)
            ]
            finals.append((final_fwd, final_bwd))
            if k + 1 < len(self.layers):
                flat = concat(per_step, axis=0)
        return per_step, finals


def bidirectional_gru(
    sequence: Tensor,
    encoder: BiGru,
    init_state_fwd: Tensor | None = None,
    init_state_bwd: Tensor | None = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """Encode a single (T, D) sequence.

    Returns per-step concatenated states (T, 2H) from the last layer plus
    that layer's final forward and backward states as (H,) vectors.  When
    initial states are given they seed every layer.  Empty sequences are
    an error.
    """
    if sequence.data.ndim != 2:
        raise ShapeMismatchError(f"expected (T, D) sequence, got {sequence.data.shape}")
    steps = sequence.data.shape[0]
    if steps == 0:
        raise ShapeMismatchError("empty sequence")
    init = None
    if init_state_fwd is not None or init_state_bwd is not None:
        if init_state_fwd is None or init_state_bwd is None:
            raise ShapeMismatchError("provide both or neither initial state")
        init = [
            (reshape(init_state_fwd, (1, -1)), reshape(init_state_bwd, (1, -1)))
            for _ in encoder.layers
        ]
    per_step, finals = encoder.run(sequence, steps, 1, None, init)
    stacked = concat(per_step, axis=0)
    final_fwd, final_bwd = finals[-1]
    return stacked, reshape(final_fwd, (-1,)), reshape(final_bwd, (-1,))
