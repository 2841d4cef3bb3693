"""Gated residual networks, LSTM, attention, and variable selection.

All blocks operate on batched rows: a leading axis of independent samples
(or sample-timesteps) and a trailing feature axis.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from .autograd import Parameter, Tensor, concat
from .layers import Linear, SwigluFF, dropout, make_norm

MASKED_SCORE = -1e30


class GatedResidualNetwork:
    """activation -> GLU gate -> residual -> norm.

    The default transform is silu(W_a x + W_c context + b_a); silu is
    smooth everywhere, which keeps finite-difference gradient checks valid
    at any data point.  Passing ff_variant swaps the transform for a gated
    feed-forward block (no context on that path).  Inputs whose width
    differs from the output are projected onto the residual.
    """

    def __init__(
        self,
        d_in: int,
        d_hidden: int,
        d_out: int,
        name: str,
        rng: np.random.Generator,
        d_context: int | None = None,
        dropout_rate: float = 0.0,
        norm_type: str = "rmsnorm",
        ff_variant: str | None = None,
    ):
        self.d_in = d_in
        self.d_out = d_out
        self.dropout_rate = dropout_rate
        self.ff = None
        self.fc1 = None
        self.context_proj = None
        if ff_variant is None:
            self.fc1 = Linear(d_in, d_hidden, f"{name}.fc1", rng)
            if d_context is not None:
                self.context_proj = Linear(d_context, d_hidden, f"{name}.ctx", rng, bias=False)
        else:
            if d_context is not None:
                raise ConfigError("feed-forward GRN variant does not take a context input")
            self.ff = SwigluFF(d_in, d_hidden, d_hidden, ff_variant, f"{name}.ff", rng)
        self.gate = Linear(d_hidden, 2 * d_out, f"{name}.gate", rng)
        self.skip = Linear(d_in, d_out, f"{name}.skip", rng, bias=False) if d_in != d_out else None
        self.norm = make_norm(norm_type, d_out, f"{name}.norm")

    def __call__(
        self,
        x: Tensor,
        context: Tensor | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"grn expected input dim {self.d_in}, got {x.shape[-1]}")
        if self.ff is not None:
            a = self.ff(x)
        else:
            pre = self.fc1(x)
            if context is not None:
                if self.context_proj is None:
                    raise ShapeError("grn was built without a context projection")
                pre = pre + self.context_proj(context)
            a = pre.silu()
        gated = self.gate(a)
        u = gated[..., : self.d_out]
        v = gated[..., self.d_out :]
        g = u * v.sigmoid()
        if training and self.dropout_rate > 0.0:
            if rng is None:
                raise ConfigError("training-mode GRN needs a dropout rng")
            g = dropout(g, self.dropout_rate, rng)
        residual = self.skip(x) if self.skip is not None else x
        return self.norm(residual + g)

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        if self.fc1 is not None:
            params += self.fc1.parameters()
        if self.context_proj is not None:
            params += self.context_proj.parameters()
        if self.ff is not None:
            params += self.ff.parameters()
        params += self.gate.parameters()
        if self.skip is not None:
            params += self.skip.parameters()
        params += self.norm.parameters()
        return params


class LstmCell:
    def __init__(self, d_in: int, hidden: int, name: str, rng: np.random.Generator):
        self.d_in = d_in
        self.hidden = hidden
        self.wx = Linear(d_in, 4 * hidden, f"{name}.wx", rng)
        self.wh = Linear(hidden, 4 * hidden, f"{name}.wh", rng, bias=False)

    def step(self, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape[-1] != self.d_in or h_prev.shape[-1] != self.hidden or c_prev.shape[-1] != self.hidden:
            raise ShapeError(
                f"lstm step dims: x {x.shape[-1]} (want {self.d_in}), "
                f"state {h_prev.shape[-1]}/{c_prev.shape[-1]} (want {self.hidden})"
            )
        z = self.wx(x) + self.wh(h_prev)
        hd = self.hidden
        gate_in = z[..., :hd].sigmoid()
        gate_forget = z[..., hd : 2 * hd].sigmoid()
        candidate = z[..., 2 * hd : 3 * hd].tanh()
        gate_out = z[..., 3 * hd :].sigmoid()
        c = gate_forget * c_prev + gate_in * candidate
        h = gate_out * c.tanh()
        return h, c

    def parameters(self) -> list[Parameter]:
        return self.wx.parameters() + self.wh.parameters()


def lstm_step(
    x: Tensor, h_prev: Tensor, c_prev: Tensor, cell: LstmCell
) -> tuple[Tensor, Tensor]:
    return cell.step(x, h_prev, c_prev)


class LstmEncoder:
    """Stacked unidirectional LSTM over (batch, time, features)."""

    def __init__(self, d_in: int, hidden: int, layers: int, name: str, rng: np.random.Generator):
        if layers < 1:
            raise ConfigError(f"lstm needs >= 1 layer, got {layers}")
        self.cells = [
            LstmCell(d_in if i == 0 else hidden, hidden, f"{name}.layer{i}", rng)
            for i in range(layers)
        ]
        self.hidden = hidden

    def __call__(self, seq: Tensor) -> Tensor:
        batch, steps = seq.shape[0], seq.shape[1]
        current = seq
        for cell in self.cells:
            h = Tensor(np.zeros((batch, self.hidden)))
            c = Tensor(np.zeros((batch, self.hidden)))
            outputs = []
            for t in range(steps):
                h, c = cell.step(current[:, t, :], h, c)
                outputs.append(h.reshape(batch, 1, self.hidden))
            current = concat(outputs, axis=1)
        return current

    def parameters(self) -> list[Parameter]:
        return [p for cell in self.cells for p in cell.parameters()]


def causal_mask(steps: int) -> np.ndarray:
    """Additive mask: 0 at or before the query position, large negative after."""
    mask = np.zeros((steps, steps))
    mask[np.triu_indices(steps, k=1)] = MASKED_SCORE
    return mask


class MultiHeadAttention:
    def __init__(self, hidden: int, n_heads: int, name: str, rng: np.random.Generator):
        if hidden % n_heads != 0:
            raise ConfigError(f"hidden size {hidden} not divisible by {n_heads} heads")
        self.hidden = hidden
        self.n_heads = n_heads
        self.head_dim = hidden // n_heads
        self.proj_q = Linear(hidden, hidden, f"{name}.q", rng)
        # No key bias: a shared key offset shifts all scores of a query
        # equally and cancels in the softmax.
        self.proj_k = Linear(hidden, hidden, f"{name}.k", rng, bias=False)
        self.proj_v = Linear(hidden, hidden, f"{name}.v", rng)
        self.proj_out = Linear(hidden, hidden, f"{name}.out", rng)

    def __call__(
        self,
        queries: Tensor,
        keys: Tensor,
        values: Tensor,
        mask: np.ndarray | None = None,
        return_weights: bool = False,
    ):
        squeeze = False
        if len(queries.shape) == 2:
            squeeze = True
            queries = queries.reshape(1, *queries.shape)
            keys = keys.reshape(1, *keys.shape)
            values = values.reshape(1, *values.shape)
        batch, len_q = queries.shape[0], queries.shape[1]
        len_k = keys.shape[1]

        def heads(x: Tensor, length: int) -> Tensor:
            return x.reshape(batch, length, self.n_heads, self.head_dim).permute(0, 2, 1, 3)

        q = heads(self.proj_q(queries), len_q)
        k = heads(self.proj_k(keys), len_k)
        v = heads(self.proj_v(values), len_k)
        scores = (q @ k.permute(0, 1, 3, 2)) * (1.0 / np.sqrt(self.head_dim))
        if mask is not None:
            scores = scores + Tensor(mask)
        weights = scores.softmax(axis=-1)
        attended = (weights @ v).permute(0, 2, 1, 3).reshape(batch, len_q, self.hidden)
        out = self.proj_out(attended)
        if squeeze:
            out = out.reshape(len_q, self.hidden)
        if return_weights:
            return out, weights
        return out

    def parameters(self) -> list[Parameter]:
        return (
            self.proj_q.parameters()
            + self.proj_k.parameters()
            + self.proj_v.parameters()
            + self.proj_out.parameters()
        )


class VariableSelection:
    """Softmax-weighted mixture of per-variable GRN transforms.

    Selection weights come from a GRN over the concatenated variable
    embeddings, optionally conditioned on a static context.
    """

    def __init__(
        self,
        n_vars: int,
        d_var: int,
        hidden: int,
        name: str,
        rng: np.random.Generator,
        d_context: int | None = None,
        dropout_rate: float = 0.0,
        norm_type: str = "rmsnorm",
    ):
        if n_vars < 1:
            raise ConfigError(f"variable selection needs >= 1 variable, got {n_vars}")
        self.n_vars = n_vars
        self.flat_grn = GatedResidualNetwork(
            n_vars * d_var,
            hidden,
            n_vars,
            f"{name}.flat",
            rng,
            d_context=d_context,
            dropout_rate=dropout_rate,
            norm_type=norm_type,
        )
        self.var_grns = [
            GatedResidualNetwork(
                d_var, hidden, hidden, f"{name}.var{i}", rng,
                dropout_rate=dropout_rate, norm_type=norm_type,
            )
            for i in range(n_vars)
        ]

    def __call__(
        self,
        variables: list[Tensor],
        context: Tensor | None = None,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, Tensor]:
        if len(variables) != self.n_vars:
            raise ShapeError(f"expected {self.n_vars} variables, got {len(variables)}")
        flat = variables[0] if self.n_vars == 1 else concat(variables, axis=-1)
        logits = self.flat_grn(flat, context, training=training, rng=rng)
        weights = logits.softmax(axis=-1)
        combined = None
        for i, var in enumerate(variables):
            term = weights[..., i : i + 1] * self.var_grns[i](var, training=training, rng=rng)
            combined = term if combined is None else combined + term
        return combined, weights

    def parameters(self) -> list[Parameter]:
        params = self.flat_grn.parameters()
        for grn in self.var_grns:
            params += grn.parameters()
        return params


def variable_selection(
    block: VariableSelection, variables: list[Tensor], context: Tensor | None = None
) -> tuple[Tensor, Tensor]:
    return block(variables, context)
