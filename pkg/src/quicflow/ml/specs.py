"""Hyper-parameter specifications for the four classifier families."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional, Union


@dataclass(frozen=True)
class KNNSpec:
    k: int = 3

    family = "knn"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class ForestSpec:
    n_trees: int = 50
    max_depth: Optional[int] = None
    max_leaves: Optional[int] = None
    # None means floor(sqrt(n_features))
    features_per_split: Optional[int] = None
    bootstrap: bool = True

    family = "rf"

    def __post_init__(self):
        for name in ("n_trees", "max_depth", "max_leaves", "features_per_split"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_leaves is not None and self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")


@dataclass(frozen=True)
class NeuralNetSpec:
    hidden_layers: tuple = (32,)
    epochs: int = 200
    learning_rate: float = 0.05
    batch_size: int = 32

    family = "nn"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if any(h < 1 for h in self.hidden_layers):
            raise ValueError("hidden layer sizes must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class SVCSpec:
    kernel: str = "rbf"
    # "scale" means 1 / (n_features * var(X))
    gamma: Union[float, str] = "scale"
    c: float = 1.0
    max_iter: int = 200
    tol: float = 1e-3

    family = "svc"

    def __post_init__(self):
        if self.kernel not in ("linear", "rbf"):
            raise ValueError("kernel must be 'linear' or 'rbf'")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                object.__setattr__(self, "gamma", float(self.gamma))
        elif not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.c > 0 or not self.tol > 0 or self.max_iter < 1:
            raise ValueError("c, tol must be positive and max_iter >= 1")


ModelSpec = Union[KNNSpec, ForestSpec, NeuralNetSpec, SVCSpec]
FAMILIES = {cls.family: cls for cls in (KNNSpec, ForestSpec, NeuralNetSpec, SVCSpec)}

_ALIASES = {
    "n": "max_depth",
    "depth": "max_depth",
    "m": "max_leaves",
    "leaves": "max_leaves",
    "trees": "n_trees",
    "hidden": "hidden_layers",
    "layers": "hidden_layers",
    "lr": "learning_rate",
    "batch": "batch_size",
    "C": "c",
}


def spec_to_dict(spec: ModelSpec) -> dict:
    doc = asdict(spec)
    if "hidden_layers" in doc:
        doc["hidden_layers"] = list(doc["hidden_layers"])
    return {"family": spec.family, **doc}


def spec_from_dict(doc: dict) -> ModelSpec:
    doc = dict(doc)
    family = doc.pop("family")
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown model family {family!r}") from None
    return cls(**doc)


def _convert(cls, name: str, text: str):
    if name == "hidden_layers":
        return tuple(int(p) for p in text.replace("x", "-").split("-") if p)
    if name == "bootstrap":
        return text.lower() in ("1", "true", "yes")
    if name in ("kernel",):
        return text
    if name == "gamma":
        return text if text == "scale" else float(text)
    if text.lower() == "none":
        return None
    ftype = {f.name: f.type for f in fields(cls)}[name]
    if "int" in str(ftype):
        return int(text)
    return float(text)


def parse_spec(text: str) -> ModelSpec:
    """Parse ``family[:key=value,...]``, e.g. ``rf:n=8,m=64`` or ``nn:hidden=32-16``."""
    family, _, rest = text.strip().partition(":")
    family = family.lower()
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; expected one of {sorted(FAMILIES)}")
    cls = FAMILIES[family]
    names = {f.name for f in fields(cls)}
    kwargs = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"expected key=value in {item!r}")
        key = _ALIASES.get(key.strip(), key.strip())
        if key not in names:
            raise ValueError(f"unknown {family} parameter {key!r}")
        kwargs[key] = _convert(cls, key, value.strip())
    return cls(**kwargs)


def spec_label(spec: ModelSpec) -> str:
    """Short human-readable tag such as ``RF(n=8,m=64)``."""
    if isinstance(spec, KNNSpec):
        return f"KNN(k={spec.k})"
    if isinstance(spec, ForestSpec):
        n = spec.max_depth if spec.max_depth is not None else "inf"
        m = spec.max_leaves if spec.max_leaves is not None else "inf"
        return f"RF(n={n},m={m})"
    if isinstance(spec, NeuralNetSpec):
        return "NN(" + ",".join(str(h) for h in spec.hidden_layers) + ")"
    g = spec.gamma if isinstance(spec.gamma, str) else f"{spec.gamma:g}"
    return f"SVC({spec.kernel},C={spec.c:g},g={g})"


def default_grid() -> list[ModelSpec]:
    grid: list = [KNNSpec(k) for k in (1, 3, 5, 9)]
    grid += [ForestSpec(max_depth=n, max_leaves=m) for n in (4, 8, 16) for m in (16, 64, 256)]
    grid += [NeuralNetSpec(hidden_layers=h) for h in ((16,), (32, 16), (64, 32, 16))]
    grid += [SVCSpec(c=c) for c in (0.1, 1.0, 10.0)]
    return grid
