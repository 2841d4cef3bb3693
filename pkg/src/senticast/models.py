"""The three forecasters: persistence baseline, NLinear, and TFT-lite."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError
from .nn.autograd import Parameter, Tensor, concat
from .nn.blocks import (
    GatedResidualNetwork,
    LstmEncoder,
    MultiHeadAttention,
    VariableSelection,
    causal_mask,
)
from .nn.layers import Linear
from .windows import KNOWN_DIM, WindowSample


@dataclass
class TrainConfig:
    """Model and optimizer settings; defaults follow the tuned grid choices."""

    lookback: int = 15
    horizon: int = 3
    hidden_size: int = 64
    lstm_layers: int = 1
    n_heads: int = 4
    feed_forward: str = "swiglu"
    dropout: float = 0.25
    hidden_continuous_size: int = 32
    norm_type: str = "rmsnorm"
    optimizer: str = "adam"
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    seed: int = 0
    dmse_alpha: float = 1e3
    nlinear_const_init: bool = True

    def validate(self) -> None:
        if self.lookback < 1 or self.horizon < 1:
            raise ConfigError(f"lookback/horizon must be >= 1, got {self.lookback}/{self.horizon}")
        if self.hidden_size < 1 or self.hidden_size % self.n_heads != 0:
            raise ConfigError(
                f"hidden_size {self.hidden_size} must be positive and divisible by n_heads {self.n_heads}"
            )
        if self.lstm_layers < 1:
            raise ConfigError(f"lstm_layers must be >= 1, got {self.lstm_layers}")
        if self.feed_forward not in ("swiglu", "relu"):
            raise ConfigError(f"feed_forward must be swiglu or relu, got {self.feed_forward!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.hidden_continuous_size < 1:
            raise ConfigError("hidden_continuous_size must be >= 1")
        if self.norm_type not in ("rmsnorm", "layernorm"):
            raise ConfigError(f"norm_type must be rmsnorm or layernorm, got {self.norm_type!r}")
        if self.optimizer != "adam":
            raise ConfigError(f"only the adam optimizer is implemented, got {self.optimizer!r}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.dmse_alpha < 1:
            raise ConfigError("dmse_alpha must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown train config fields: {sorted(extra)}")
        cfg = replace(cls(), **data)
        cfg.validate()
        return cfg


def naive_seasonal_forecast(history: Sequence[float], horizon: int) -> list[float]:
    """Persistence: repeat the last observed value over the horizon."""
    if len(history) == 0:
        raise ValidationError("naive forecast needs a nonempty history")
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    return [float(history[-1])] * horizon


class NLinear:
    """Subtract the window's last close, map linearly to the horizon, add it back.

    Operates on the close channel only; covariates are ignored by design.
    """

    kind = "nlinear"

    def __init__(
        self,
        lookback: int,
        horizon: int,
        close_col: int,
        rng: np.random.Generator,
        const_init: bool = True,
    ):
        self.lookback = lookback
        self.horizon = horizon
        self.close_col = close_col
        if const_init:
            weight = np.full((lookback, horizon), 1.0 / lookback)
        else:
            bound = 1.0 / np.sqrt(lookback)
            weight = rng.uniform(-bound, bound, size=(lookback, horizon))
        self.weight = Parameter(weight, "nlinear.weight")
        self.bias = Parameter(np.zeros(horizon), "nlinear.bias")

    def forward(self, x: Tensor) -> Tensor:
        """x: (batch, lookback) close values -> (batch, horizon)."""
        if x.shape[-1] != self.lookback:
            raise ShapeError(f"nlinear expected window of {self.lookback}, got {x.shape[-1]}")
        last = x[:, self.lookback - 1 : self.lookback]
        return (x - last) @ self.weight + self.bias + last

    def forward_batch(
        self,
        past: np.ndarray,
        known: np.ndarray,
        company: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        return self.forward(Tensor(past[:, :, self.close_col]))

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]


def nlinear_forward(x: Sequence[float], model: NLinear) -> np.ndarray:
    """Single-window convenience wrapper around NLinear.forward."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"expected a 1-d window, got shape {arr.shape}")
    return model.forward(Tensor(arr.reshape(1, -1))).data[0]


class TftLite:
    """A compact temporal fusion forecaster.

    Static company embedding conditions per-timestep variable selection; an
    LSTM encoder and causal multi-head self-attention summarize the window;
    the final attended position passes through a gated feed-forward block
    and, joined with the known future calendar covariates, an affine head
    produces all horizon steps at once.
    """

    kind = "tft_lite"

    def __init__(
        self,
        config: TrainConfig,
        n_features: int,
        n_companies: int,
        rng: np.random.Generator,
        known_dim: int = KNOWN_DIM,
    ):
        config.validate()
        if n_features < 1 or n_companies < 1:
            raise ConfigError(f"need >= 1 feature and company, got {n_features}, {n_companies}")
        self.config = config
        self.n_features = n_features
        self.n_companies = n_companies
        self.known_dim = known_dim
        hidden = config.hidden_size
        hcs = config.hidden_continuous_size
        norm = config.norm_type
        drop = config.dropout

        self.company_embedding = Parameter(
            rng.normal(0.0, 0.1, size=(n_companies, hidden)), "tft.static.embedding"
        )
        self.var_proj = [
            Linear(1, hcs, f"tft.varproj{i}", rng) for i in range(n_features)
        ]
        self.selector = VariableSelection(
            n_features, hcs, hidden, "tft.vsn", rng,
            d_context=hidden, dropout_rate=drop, norm_type=norm,
        )
        self.encoder = LstmEncoder(hidden, hidden, config.lstm_layers, "tft.lstm", rng)
        self.enrichment = GatedResidualNetwork(
            hidden, hidden, hidden, "tft.enrich", rng,
            d_context=hidden, dropout_rate=drop, norm_type=norm,
        )
        self.attention = MultiHeadAttention(hidden, config.n_heads, "tft.attn", rng)
        self.position_ff = GatedResidualNetwork(
            hidden, hidden, hidden, "tft.posff", rng,
            dropout_rate=drop, norm_type=norm, ff_variant=config.feed_forward,
        )
        self.head = Linear(hidden + config.horizon * known_dim, config.horizon, "tft.head", rng)
        self.head.bias.data[:] = 0.0  # start forecasts at the unbiased origin

    def forward_batch(
        self,
        past: np.ndarray,
        known: np.ndarray,
        company: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        batch, steps, n_features = past.shape
        cfg = self.config
        if n_features != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {n_features}")
        if steps != cfg.lookback:
            raise ShapeError(f"expected lookback {cfg.lookback}, got {steps}")
        if known.shape != (batch, cfg.horizon, self.known_dim):
            raise ShapeError(f"known-future shape {known.shape} does not match config")

        company = np.asarray(company, dtype=np.int64)
        static = self.company_embedding[company]  # (batch, hidden)
        context = static.repeat_rows(steps)  # (batch*steps, hidden), sample-major

        flat_past = Tensor(past.reshape(batch * steps, n_features))
        variables = [
            self.var_proj[i](flat_past[:, i : i + 1]) for i in range(n_features)
        ]
        combined, _ = self.selector(variables, context, training=training, rng=rng)

        sequence = combined.reshape(batch, steps, cfg.hidden_size)
        encoded = self.encoder(sequence)

        enriched = self.enrichment(
            encoded.reshape(batch * steps, cfg.hidden_size), context, training=training, rng=rng
        ).reshape(batch, steps, cfg.hidden_size)

        attended = self.attention(enriched, enriched, enriched, mask=causal_mask(steps))
        final = attended[:, steps - 1, :]
        final = self.position_ff(final, training=training, rng=rng)

        head_input = concat(
            [final, Tensor(known.reshape(batch, cfg.horizon * self.known_dim))], axis=-1
        )
        return self.head(head_input)

    def parameters(self) -> list[Parameter]:
        params = [self.company_embedding]
        for proj in self.var_proj:
            params += proj.parameters()
        params += self.selector.parameters()
        params += self.encoder.parameters()
        params += self.enrichment.parameters()
        params += self.attention.parameters()
        params += self.position_ff.parameters()
        params += self.head.parameters()
        return params


def tft_lite_forward(
    sample: WindowSample,
    model: TftLite,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Single-sample forward pass; training mode applies seeded dropout."""
    if mode not in ("train", "eval"):
        raise ConfigError(f"mode must be train or eval, got {mode!r}")
    out = model.forward_batch(
        sample.past[None, :, :],
        sample.known_future[None, :, :],
        np.asarray([sample.company_index]),
        training=(mode == "train"),
        rng=rng,
    )
    return out.data[0]
