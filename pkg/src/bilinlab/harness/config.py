"""Experiment configuration: a JSON document per experiment, validated before any compute."""

import json
import re
from dataclasses import asdict, dataclass, field

from ..errors import UsageError

#: sweep axes and required params for each experiment kind
KINDS = {
    "decay-sweep": {"axes": ("lambda", "mu"), "params": ("phase_a", "phase_b", "amp_a", "amp_b")},
    "kernel-decay": {"axes": ("offset",),
                     "params": ("phase_a", "phase_b", "amp_a", "amp_b", "lambda", "mu")},
    "transversality": {"axes": (), "params": ("phase_a", "phase_b", "lattice")},
    "torus-bilinear": {"axes": ("N1", "N2", "T"), "params": ()},
    "torus-rescaled": {"axes": ("lambda_scale", "N1", "N2"), "params": ()},
    "torus-mixed": {"axes": ("N1", "N2", "T"), "params": ()},
    "torus-derivative": {"axes": ("N1", "N2", "T"), "params": ("orders",)},
    "linear-baseline": {"axes": ("N", "T"), "params": ()},
    "sharpness": {"axes": ("N1",), "params": ()},
    "parametrix": {"axes": ("N",), "params": ("eps",)},
}

_TIE = re.compile(r"^\s*(?:(\d+(?:\.\d*)?)\s*([*/])\s*)?(N1|N)\s*$")


def parse_tie(value):
    """Parse a scale tied to another axis: "N1", "16*N1", "1/N1", "1/N".

    Returns (coefficient, operator, axis) or None for plain numbers.
    """
    if not isinstance(value, str):
        return None
    m = _TIE.match(value)
    if not m:
        raise UsageError(f"cannot parse sweep value {value!r}")
    coef = float(m.group(1)) if m.group(1) else 1.0
    return coef, m.group(2) or "*", m.group(3)


def resolve_tie(value, coords):
    """Numeric value of a sweep entry given the other coordinates of its cell."""
    tie = parse_tie(value)
    if tie is None:
        return float(value)
    coef, op, axis = tie
    return coef * coords[axis] if op == "*" else coef / coords[axis]


@dataclass
class ExperimentConfig:
    """One experiment.

    Attributes
    ----------
    kind : str
        One of `KINDS`.
    name : str
        Used for the output sub-directory and the seed stream.
    d : int
        Spatial dimension.
    sweep : dict
        Axis name -> nonempty list of scale values.  Entries may be tied to
        another axis with strings such as "1/N1" or "16*N1".
    params : dict
        Kind-specific settings (phases, amplitude boxes, metric, orders...).
    trials, seed : int
    tolerance, r2_floor, min_span : float or None
        Verdict settings; None selects the default for the kind.
    output_dir : str or None
    """

    kind: str
    name: str = ""
    d: int = 1
    sweep: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    trials: int = 8
    seed: int = 0
    tolerance: float = None
    r2_floor: float = None
    min_span: float = None
    output_dir: str = None

    def __post_init__(self):
        if not self.name:
            self.name = self.kind

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in data:
            raise UsageError("config needs a 'kind'")
        return cls(**data)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    @property
    def axes(self):
        return KINDS[self.kind]["axes"]

    def validate(self):
        """Raise UsageError describing the first problem found; return self."""
        if self.kind not in KINDS:
            raise UsageError(f"unknown kind {self.kind!r}; expected one of {sorted(KINDS)}")
        spec = KINDS[self.kind]
        if not isinstance(self.d, int) or self.d < 1 or self.d > 3:
            raise UsageError("d must be 1, 2 or 3")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise UsageError("trials must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise UsageError("seed must be a nonnegative integer")
        extra = set(self.sweep) - set(spec["axes"])
        if extra:
            raise UsageError(f"kind {self.kind} has no sweep axes {sorted(extra)}")
        for axis in spec["axes"]:
            values = self.sweep.get(axis)
            if not isinstance(values, list) or not values:
                raise UsageError(f"sweep axis {axis!r} must be a nonempty list")
            for v in values:
                tie = parse_tie(v)
                if tie is None:
                    numeric = isinstance(v, (int, float)) and not isinstance(v, bool)
                    if not numeric or not (v >= 0 if axis == "offset" else v > 0):
                        raise UsageError(f"sweep axis {axis!r}: {v!r} is out of range")
                elif tie[2] == axis or tie[2] not in spec["axes"]:
                    raise UsageError(f"sweep axis {axis!r}: {v!r} ties to an invalid axis")
        for key in spec["params"]:
            if key not in self.params:
                raise UsageError(f"kind {self.kind} needs params[{key!r}]")
        for name in ("tolerance", "r2_floor", "min_span"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0):
                raise UsageError(f"{name} must be a nonnegative number")
        return self
