"""Flat key-value run configuration.

Config files hold one ``key = value`` per line (# starts a comment). Every
key has a CLI flag of the same name, with dots and underscores written as
hyphens (halo.alpha -> --halo-alpha); explicit flags override the file,
which overrides the defaults.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .halo import HaloConfig
from .training import TrainConfig


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ConfigKey:
    name: str
    type: type
    default: object
    help: str

    @property
    def flag(self) -> str:
        return "--" + self.name.replace(".", "-").replace("_", "-")

    def parse(self, text: str):
        if self.type is bool:
            return _parse_bool(text)
        return self.type(text)


TRAIN_KEYS: list[ConfigKey] = [
    ConfigKey("epochs", int, 30, "training epochs"),
    ConfigKey("batch_size", int, 16, "examples per optimizer step"),
    ConfigKey("learning_rate", float, 1e-3, "constant learning rate"),
    ConfigKey("optimizer", str, "adam", "sgd or adam"),
    ConfigKey("clip_norm", float, 5.0, "global gradient-norm cap"),
    ConfigKey("seed", int, 0, "model stream: parameter init, shuffling"),
    ConfigKey("dev_eval_every", int, 1, "epochs between dev evaluations"),
    ConfigKey("patience", int, 5, "dev evaluations without improvement before stopping"),
    ConfigKey("hidden_dim", int, 64, "decoder/encoder hidden size D"),
    ConfigKey("embed_dim", int, 32, "embedding size E"),
    ConfigKey("min_count", int, 1, "vocabulary frequency threshold"),
    ConfigKey("halo_seed", int, 17, "neighbor stream: halo sampling only"),
    ConfigKey("halo.enabled", bool, True, "turn the neighbor loss on or off"),
    ConfigKey("halo.alpha", float, 1.0, "Beta alpha for the mixing coefficient"),
    ConfigKey("halo.beta", float, 19.0, "Beta beta for the mixing coefficient"),
    ConfigKey("halo.n_neighbors", int, 1, "neighbors averaged per step"),
    ConfigKey("halo.weight", float, 1.0, "multiplier on the neighbor loss"),
    ConfigKey("halo.partition", str, "bytag", "bytag | singleton | custom(path)"),
    ConfigKey("halo.detach_neighbor", bool, False, "cut the gradient path from neighbor to state"),
]

_KEY_BY_NAME = {k.name: k for k in TRAIN_KEYS}


def read_config_file(path: str | Path) -> dict[str, object]:
    """Parse a key-value file into typed settings; unknown keys are errors."""
    settings: dict[str, object] = {}
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value'")
        name, value = (part.strip() for part in line.split("=", 1))
        key = _KEY_BY_NAME.get(name)
        if key is None:
            raise ValueError(f"{path}:{ln}: unknown config key {name!r}")
        settings[name] = key.parse(value)
    return settings


def build_train_config(settings: dict[str, object]) -> tuple[TrainConfig, int, int, int]:
    """Materialize TrainConfig plus (hidden_dim, embed_dim, min_count)."""
    values = {k.name: k.default for k in TRAIN_KEYS}
    for name, value in settings.items():
        if name not in values:
            raise ValueError(f"unknown config key {name!r}")
        values[name] = value
    halo = HaloConfig(
        enabled=values["halo.enabled"],
        alpha=values["halo.alpha"],
        beta=values["halo.beta"],
        n_neighbors=values["halo.n_neighbors"],
        weight=values["halo.weight"],
        partition=values["halo.partition"],
        detach_neighbor=values["halo.detach_neighbor"],
    )
    config = TrainConfig(
        epochs=values["epochs"],
        batch_size=values["batch_size"],
        learning_rate=values["learning_rate"],
        optimizer=values["optimizer"],
        clip_norm=values["clip_norm"],
        seed=values["seed"],
        dev_eval_every=values["dev_eval_every"],
        patience=values["patience"],
        halo_seed=values["halo_seed"],
        halo=halo,
    )
    return config, values["hidden_dim"], values["embed_dim"], values["min_count"]
