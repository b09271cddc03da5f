"""Training configuration and its flat ``key=value`` text form."""

from dataclasses import asdict, dataclass, fields

from .errors import ContractError, ParseError

ABLATIONS = ("full", "S", "N", "nr")
MODES = ("semi", "unsup")


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 0.1
    lambda2: float = 0.005
    lambda_kl: float = 1.0
    alpha: float = 0.7
    k_components: int = 3
    d1: int = 8
    d2: int = 8
    hidden: int = 64
    epochs: int = 200
    lr: float = 1e-3
    seed: int = 0
    ablation: str = "full"
    train_fraction: float = 0.5
    mode: str = "semi"
    weights_inside_activation: bool = False

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda_kl"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ContractError("alpha must lie in [0, 1]")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ContractError("train_fraction must lie in (0, 1]")
        if self.ablation not in ABLATIONS:
            raise ContractError(f"ablation must be one of {ABLATIONS}")
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}")
        for name in ("k_components", "d1", "d2", "hidden"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive")
        if self.epochs < 0:
            raise ContractError("epochs must be non-negative")

    def replace(self, **changes):
        return TrainConfig(**{**asdict(self), **changes})

    def to_lines(self):
        return [f"{k}={v}" for k, v in asdict(self).items()]

    def to_text(self):
        return "\n".join(self.to_lines()) + "\n"

    @classmethod
    def from_lines(cls, lines, base=None):
        values = asdict(base or cls())
        values.update(parse_key_values(lines, known=values))
        return cls(**values)

    @classmethod
    def from_text(cls, text, base=None):
        return cls.from_lines(text.splitlines(), base)


_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def coerce(name, raw, kind):
    kind = {"float": float, "int": int, "str": str, "bool": bool}.get(kind, kind)
    if kind is bool:
        low = str(raw).strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ParseError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError:
        raise ParseError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_key_values(lines, known=None, path=None):
    """Parse ``key=value`` lines; ``#`` starts a comment, blank lines are skipped.

    Keys may use dashes or underscores.  With ``known`` given, values are
    coerced to the type of the existing entry and unknown keys are rejected.
    """
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key=value", path, lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if known is not None:
            if key not in known:
                raise ParseError(f"unknown key {key!r}", path, lineno)
            kind = _TYPES.get(key, type(known[key]).__name__)
            out[key] = coerce(key, raw, kind)
        else:
            out[key] = raw
    return out
