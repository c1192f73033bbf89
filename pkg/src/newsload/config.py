"""Flat ``key = value`` run configuration.

Lines starting with ``#`` are comments. Keys are the field names of
:class:`RunConfig`; synthetic-generator fields take a ``synth_`` prefix
(``synth_n_days = 400``). Lists are comma separated.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from newsload.errors import ConfigError
from newsload.ingest import SyntheticSpec

GROUP_LETTERS = {"W": "wordfreq", "S": "sentiment", "T": "topic", "G": "embedding", "N": "count"}


@dataclass
class RunConfig:
    seed: int | None = None
    out_dir: str = "out"
    data_dir: str = ""
    synthetic: bool = False
    start_date: str = ""
    end_date: str = ""
    split_date: str = ""
    # model variant, e.g. "LSTM-S-G-CG"; ablate uses ``variants``
    variant: str = "LSTM"
    variants: tuple = ("LSTM",)
    baseline: str = ""
    granger: bool = True
    granger_max_lag: int = 7
    granger_alpha: float = 0.05
    granger_bonferroni: bool = False
    ae_plan: tuple = ()
    ae_kernel_width: int = 3
    ae_lr: float = 1e-3
    ae_batch: int = 4
    ae_chunk_days: int = 28
    ae_patience: int = 20
    ae_max_epochs: int = 1000
    mode: str = "point"
    batch: int = 4
    lr: float = 1e-4
    patience: int = 10
    max_epochs: int = 500
    hidden: int = 24
    wide_interval: bool = False
    corpus_path: str = ""
    keywords: tuple = ()
    lexicon_path: str = ""
    text_fields: tuple = ("title", "description", "body")
    embedding_dims: int = 100
    synth: SyntheticSpec = field(default_factory=SyntheticSpec)

    def validate(self):
        if self.seed is None:
            raise ConfigError("seed is mandatory (set 'seed' in the config or pass --seed)")
        if self.mode not in ("point", "quantile"):
            raise ConfigError(f"mode must be point or quantile, not {self.mode!r}")
        if not self.synthetic and not self.data_dir:
            raise ConfigError("set data_dir or synthetic = true")
        for v in (self.variant,) + tuple(self.variants):
            parse_variant(v)
        return self

    def resolved(self):
        """Plain dict of every setting, used for manifests."""
        d = dataclasses.asdict(self)
        d["synth"] = dataclasses.asdict(self.synth)
        return d


def parse_variant(name):
    """``"LSTM-S-G-CG"`` -> ("S", "G", "CG"); raises on unknown letters."""
    parts = name.strip().split("-")
    if parts[0] != "LSTM":
        raise ConfigError(f"variant {name!r} must start with 'LSTM'")
    groups = tuple(parts[1:])
    for g in groups:
        if g not in GROUP_LETTERS and g != "CG":
            raise ConfigError(f"unknown feature group {g!r} in variant {name!r}")
    return groups


def _convert(raw, typ, key):
    # field annotations are strings such as "int | None" or "tuple"
    base = str(typ).split("|")[0].strip()
    raw = raw.strip()
    try:
        if raw.lower() == "none" and "None" in str(typ):
            return None
        if base == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if base in ("tuple", "list"):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            return tuple(int(s) for s in items) if key == "ae_plan" else tuple(items)
        if base == "int":
            return int(raw)
        if base == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text, base=None):
    cfg = base or RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    synth_types = {f.name: f.type for f in fields(SyntheticSpec)}
    synth = dataclasses.asdict(cfg.synth)
    for line_no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("synth_"):
            name = key[len("synth_"):]
            if name not in synth_types:
                raise ConfigError(f"line {line_no}: unknown key {key!r}")
            if name == "daily_profile":
                synth[name] = [float(v) for v in value.split(",")]
            else:
                synth[name] = _convert(value, synth_types[name], key)
        elif key in types and key != "synth":
            setattr(cfg, key, _convert(value, types[key], key))
        else:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
    try:
        cfg.synth = SyntheticSpec(**synth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def dump_config(cfg):
    """Render a config back to the flat text format."""
    lines = []
    for f in fields(RunConfig):
        if f.name == "synth":
            continue
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    for f in fields(SyntheticSpec):
        v = getattr(cfg.synth, f.name)
        if v is None:
            continue
        if isinstance(v, (list, tuple)):
            v = ",".join(repr(float(x)) for x in v)
        lines.append(f"synth_{f.name} = {v}")
    return "\n".join(lines) + "\n"
