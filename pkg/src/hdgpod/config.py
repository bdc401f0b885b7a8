"""Run configuration: presets, flat key-value config files, validation."""

from dataclasses import dataclass, field, asdict, replace


@dataclass
class RunConfig:
    """Everything needed to reproduce one pipeline run."""

    dim: int = 2
    n: int = 4
    k: int = 1
    c: float = 0.01
    tau: float = 1.0
    dt: float = 0.02
    T: float = 1.0
    problem: str = "custom"
    u0: str = "sin(pi*x)*sin(pi*y)*exp(x)*cos(y)"
    f: str = None
    r_list: list = field(default_factory=lambda: [1, 3, 5])
    keep_every: int = 1
    seed: int = 0

    def validate(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        for name in ("n", "k", "keep_every"):
            if int(getattr(self, name)) < (1 if name != "k" else 0):
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("c", "tau", "dt", "T"):
            if float(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.dt > self.T:
            raise ValueError(f"dt={self.dt} exceeds T={self.T}")
        if any(int(r) < 1 for r in self.r_list):
            raise ValueError("every entry of r_list must be >= 1")
        return self

    def as_dict(self):
        return asdict(self)


# The reported experiments use diffusivity 0.01, i.e. the coefficient
# multiplying the flux mass term is its reciprocal, 100.  (Taking the
# mass-term coefficient itself as 0.01 kills the trajectory within ~20
# steps and caps the usable reduced order near 10, which contradicts the
# reported error tables reaching r = 20.)
PAPER_C = 100.0

PRESETS = {
    # the two reported experiments: unit square / cube, backward Euler
    # with dt = 1e-3 on (0, 1], tau = 1, zero source
    "2d-paper": RunConfig(
        dim=2, n=32, k=1, c=PAPER_C, tau=1.0, dt=1e-3, T=1.0,
        problem="2d-paper",
        u0="sin(pi*x)*sin(pi*y)*exp(x)*cos(y)",
        f=None, r_list=[7, 10, 13, 16, 20],
    ),
    "3d-paper": RunConfig(
        dim=3, n=16, k=1, c=PAPER_C, tau=1.0, dt=1e-3, T=1.0,
        problem="3d-paper",
        u0="sin(pi*x)*sin(pi*y)*sin(pi*z)*exp(x)*cos(y)*z",
        f=None, r_list=[3, 6, 9, 12, 15],
    ),
    # reduced-size variant of the 3D experiment for memory-limited machines
    "3d-small": RunConfig(
        dim=3, n=8, k=1, c=PAPER_C, tau=1.0, dt=1e-3, T=1.0,
        problem="3d-small",
        u0="sin(pi*x)*sin(pi*y)*sin(pi*z)*exp(x)*cos(y)*z",
        f=None, r_list=[3, 6, 9, 12, 15],
    ),
    # desk-scale 2D run used by the verification battery
    "2d-small": RunConfig(
        dim=2, n=4, k=1, c=PAPER_C, tau=1.0, dt=0.02, T=1.0,
        problem="2d-small",
        u0="sin(pi*x)*sin(pi*y)*exp(x)*cos(y)",
        f=None, r_list=[1, 3, 5],
    ),
}

_FIELD_TYPES = {
    "dim": int, "n": int, "k": int, "keep_every": int, "seed": int,
    "c": float, "tau": float, "dt": float, "T": float,
    "problem": str, "u0": str, "f": str,
}


def _parse_value(key, raw):
    raw = raw.strip()
    if key == "r_list":
        return [int(v) for v in raw.replace(",", " ").split()]
    if key == "f" and raw.lower() in ("", "none", "0"):
        return None
    caster = _FIELD_TYPES.get(key)
    if caster is None:
        raise ValueError(f"unknown configuration key {key!r}")
    return caster(raw)


def load_config_file(path):
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = line.split("=", 1)
            key = key.strip()
            values[key] = _parse_value(key, raw)
    return values


def resolve_config(preset=None, config_file=None, overrides=None):
    """Combine preset defaults, a config file, and overrides (in that order)."""
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(
                f"unknown preset {preset!r}; available: {sorted(PRESETS)}"
            )
        cfg = replace(PRESETS[preset])
    else:
        cfg = RunConfig()
    updates = {}
    if config_file is not None:
        updates.update(load_config_file(config_file))
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            updates[key] = _parse_value(key, str(value)) if isinstance(
                value, str
            ) else value
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg
