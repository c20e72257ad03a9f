"""Run configuration: typed dataclasses plus a flat key=value text format.

The on-disk format is one `section.key = value` pair per line ('#' starts
a comment). Serialization is canonical (fixed key order, fixed float
repr), so serialize -> parse -> serialize is byte-identical.
"""

from dataclasses import dataclass, field, fields

from .errors import ConfigError

FUSION_MODE_CHOICES = (
    "full", "no_daw", "no_ca_sa", "baseline",
    "first_layer", "second_layer", "third_layer",
)
ENCODER_MODE_CHOICES = ("full", "no_depth", "no_residual", "no_vit")
DECODER_MODE_CHOICES = ("full", "no_geca", "no_fam", "no_residual", "baseline")


@dataclass
class ModelConfig:
    input_size: int = 352
    stage_channels: tuple = (8, 16, 32, 64)
    blocks_per_stage: tuple = (1, 1, 1, 1)
    rgb_variant: str = "res2net_like"
    depth_variant: str = "resnet_like"
    res2net_scale: int = 4
    ca_reduction: int = 4
    sa_kernel: int = 7
    eca_kernel: int = 3
    vit_patch: int = 2
    vit_dim: int = 32
    vit_depth: int = 1
    vit_heads: int = 2
    decoder_width: int = 16
    fusion_mode: str = "full"
    encoder_mode: str = "full"
    decoder_mode: str = "full"
    use_rmfe: bool = True

    def validate(self):
        if self.fusion_mode not in FUSION_MODE_CHOICES:
            raise ConfigError(f"unknown fusion_mode {self.fusion_mode!r}")
        if self.encoder_mode not in ENCODER_MODE_CHOICES:
            raise ConfigError(f"unknown encoder_mode {self.encoder_mode!r}")
        if self.decoder_mode not in DECODER_MODE_CHOICES:
            raise ConfigError(f"unknown decoder_mode {self.decoder_mode!r}")
        if self.input_size % 16 != 0:
            raise ConfigError("input_size must be divisible by 16 (four stride-2 stages)")
        if (self.input_size // 16) % self.vit_patch != 0:
            raise ConfigError(
                f"coarsest stage grid {self.input_size // 16} not divisible by "
                f"vit_patch {self.vit_patch}"
            )


@dataclass
class DataConfig:
    root: str = "data"
    train_split: str = "train"
    eval_split: str = "test"
    crop_frac: float = 0.03
    rgb_mean: tuple = (0.485, 0.456, 0.406)
    rgb_std: tuple = (0.229, 0.224, 0.225)


@dataclass
class OptimConfig:
    lr: float = 1e-5
    weight_decay: float = 1e-4
    batch_size: int = 4
    epochs: int = 100
    lr_decay_epochs: int = 50
    lr_decay_factor: float = 0.1
    lambda_weights: tuple = (1.0, 0.5, 0.25)
    max_steps: int = 0  # 0 = run all epochs


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)

    def validate(self):
        self.model.validate()
        return self


_SECTIONS = {"model": ModelConfig, "data": DataConfig, "optim": OptimConfig}


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(text, ftype, key):
    text = text.strip()
    try:
        if ftype is bool:
            if text not in ("true", "false"):
                raise ValueError(text)
            return text == "true"
        if ftype is int:
            return int(text)
        if ftype is float:
            return float(text)
        if ftype is tuple:
            parts = [p.strip() for p in text.split(",") if p.strip()]
            nums = []
            for p in parts:
                nums.append(float(p) if ("." in p or "e" in p or "E" in p) else int(p))
            return tuple(nums)
        return text
    except ValueError:
        raise ConfigError(f"cannot parse value {text!r} for key {key!r}") from None


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"seed = {cfg.seed}", f"output_dir = {cfg.output_dir}"]
    for section in ("model", "data", "optim"):
        obj = getattr(cfg, section)
        for f in fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    known = {
        section: {f.name: f.type for f in fields(cls)}
        for section, cls in _SECTIONS.items()
    }
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "seed":
            cfg.seed = _parse_value(value, int, key)
        elif key == "output_dir":
            cfg.output_dir = _parse_value(value, str, key)
        elif "." in key:
            section, name = key.split(".", 1)
            if section not in known or name not in known[section]:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            ftype_name = known[section][name]
            ftype = {"int": int, "float": float, "str": str, "bool": bool,
                     "tuple": tuple}[ftype_name if isinstance(ftype_name, str) else ftype_name.__name__]
            setattr(getattr(cfg, section), name, _parse_value(value, ftype, key))
        else:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
    return cfg.validate()


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply {'model.fusion_mode': 'no_daw', ...} onto a copy of cfg."""
    text = serialize_config(cfg)
    lines = []
    seen = set()
    for line in text.splitlines():
        key = line.split("=", 1)[0].strip()
        if key in overrides:
            lines.append(f"{key} = {overrides[key]}")
            seen.add(key)
        else:
            lines.append(line)
    missing = set(overrides) - seen
    if missing:
        raise ConfigError(f"unknown override keys: {sorted(missing)}")
    return parse_config("\n".join(lines))
