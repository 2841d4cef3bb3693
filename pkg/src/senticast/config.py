"""Run configuration: flat key-value files with dotted sections, plus overrides."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError, ParseError
from .models import TrainConfig

_TRAIN_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}

_INT_FIELDS = {
    "lookback", "horizon", "hidden_size", "lstm_layers", "n_heads",
    "hidden_continuous_size", "batch_size", "epochs", "seed",
}
_FLOAT_FIELDS = {"dropout", "learning_rate", "beta1", "beta2", "adam_eps", "dmse_alpha"}
_BOOL_FIELDS = {"nlinear_const_init"}


@dataclass
class RunConfig:
    ohlcv_dir: Path
    tweets_file: Path
    output_dir: Path
    tickers: list[str]
    embeddings_file: Path | None = None
    holidays_file: Path | None = None
    feature_set: str = "HLOVS"
    smoothing_span: int = 15
    atr_period: int = 14
    split: float = 0.8
    model: str = "tft_lite"
    loss: str = "dmse"
    seed: int = 0
    jobs: int = 1
    validation_fraction: float = 0.2
    train: TrainConfig = field(default_factory=TrainConfig)
    grid: dict[str, list] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.tickers:
            raise ConfigError("tickers must be nonempty")
        if self.feature_set not in ("HLOV", "HLOVS", "HLOVE"):
            raise ConfigError(f"unknown feature set {self.feature_set!r}")
        if self.model not in ("nlinear", "tft_lite"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.loss not in ("dmse", "mse"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if not 0.0 < self.split < 1.0:
            raise ConfigError(f"split must be in (0, 1), got {self.split}")
        if self.smoothing_span < 1 or self.atr_period < 1:
            raise ConfigError("smoothing_span and atr_period must be >= 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must be in (0, 1)")
        self.train.validate()


def _parse_scalar(key: str, raw: str):
    if key in _INT_FIELDS:
        return int(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _BOOL_FIELDS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    return raw


def _grid_values(key: str, raw: str) -> list:
    return [_parse_scalar(key, part.strip()) if key != "model" else part.strip()
            for part in raw.split(",") if part.strip()]


def read_key_values(path: Path | str) -> dict[str, str]:
    """`key = value` lines; # comments and blank lines ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ParseError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ParseError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_run_config(path: Path | str) -> RunConfig:
    """Parse a config file; relative paths resolve against its directory."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    pairs = read_key_values(path)
    base_dir = path.parent

    def take_path(key: str, required: bool = False) -> Path | None:
        raw = pairs.pop(key, None)
        if raw is None:
            if required:
                raise ConfigError(f"{path}: missing required key {key!r}")
            return None
        return (base_dir / raw).resolve() if not Path(raw).is_absolute() else Path(raw)

    ohlcv_dir = take_path("paths.ohlcv_dir", required=True)
    tweets_file = take_path("paths.tweets", required=True)
    output_dir = take_path("paths.output", required=True)
    embeddings_file = take_path("paths.embeddings")
    holidays_file = take_path("paths.holidays")

    tickers_raw = pairs.pop("tickers", "")
    tickers = [t.strip().upper() for t in tickers_raw.split(",") if t.strip()]

    config = RunConfig(
        ohlcv_dir=ohlcv_dir,
        tweets_file=tweets_file,
        output_dir=output_dir,
        tickers=tickers,
        embeddings_file=embeddings_file,
        holidays_file=holidays_file,
    )

    train_kwargs: dict = {}
    for key in list(pairs):
        value = pairs.pop(key)
        if key.startswith("train."):
            name = key[len("train.") :]
            if name == "model":
                config.model = value
            elif name == "loss":
                config.loss = value
            elif name in _TRAIN_FIELD_TYPES:
                train_kwargs[name] = _parse_scalar(name, value)
            else:
                raise ConfigError(f"{path}: unknown train key {name!r}")
        elif key.startswith("grid."):
            name = key[len("grid.") :]
            if name != "model" and name not in _TRAIN_FIELD_TYPES:
                raise ConfigError(f"{path}: unknown grid key {name!r}")
            config.grid[name] = _grid_values(name, value)
        elif key == "feature_set":
            config.feature_set = value.upper()
        elif key == "seed":
            config.seed = int(value)
        elif key == "smoothing_span":
            config.smoothing_span = int(value)
        elif key == "analysis.atr_period":
            config.atr_period = int(value)
        elif key == "split":
            config.split = float(value)
        elif key == "jobs":
            config.jobs = int(value)
        elif key == "gridsearch.validation_fraction":
            config.validation_fraction = float(value)
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")

    if "seed" not in train_kwargs:
        train_kwargs["seed"] = config.seed
    config.train = replace(TrainConfig(), **train_kwargs)
    config.validate()
    return config


def apply_overrides(config: RunConfig, overrides: dict[str, str]) -> RunConfig:
    """CLI flag overrides; keys are train fields or top-level run keys."""
    train_kwargs: dict = {}
    for key, raw in overrides.items():
        if raw is None:
            continue
        value = str(raw)
        if key in _TRAIN_FIELD_TYPES:
            train_kwargs[key] = _parse_scalar(key, value)
        elif key == "feature_set":
            config.feature_set = value.upper()
        elif key == "model":
            config.model = value
        elif key == "loss":
            config.loss = value
        elif key == "output":
            config.output_dir = Path(value)
        elif key == "jobs":
            config.jobs = int(value)
        elif key == "split":
            config.split = float(value)
        elif key == "smoothing_span":
            config.smoothing_span = int(value)
        elif key == "atr_period":
            config.atr_period = int(value)
        elif key == "validation_fraction":
            config.validation_fraction = float(value)
        else:
            raise ConfigError(f"unknown override key {key!r}")
    if "seed" in train_kwargs:
        config.seed = int(train_kwargs["seed"])
    if train_kwargs:
        config.train = replace(config.train, **train_kwargs)
    config.validate()
    return config
