"""Flat key-value run configuration.

Format: `key = value` lines, full-line or trailing `#` comments, optional
`[section]` headers (purely cosmetic grouping; keys are global and must be
unique).  Unknown keys are errors.  Values are validated eagerly so a bad
configuration never allocates solver state.
"""

import math
from dataclasses import dataclass, field as dfield
from typing import Optional

from .diagnostics import StripRule
from .dynamics import BranchKind, classify_kind


class ConfigError(ValueError):
    pass


def _parse_bool(s):
    low = s.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s):
    return tuple(float(tok) for tok in s.replace(",", " ").split())


def _parse_resolutions(s):
    out = []
    for tok in s.replace(",", " ").split():
        nx, _, ny = tok.partition("x")
        if not ny:
            raise ValueError(f"resolution {tok!r} must look like 64x96")
        out.append((int(nx), int(ny)))
    return tuple(out)


_BRANCH_NAMES = {
    "second-grade": BranchKind.SECOND_GRADE,
    "euler-alpha": BranchKind.EULER_ALPHA,
    "navier-stokes": BranchKind.NAVIER_STOKES,
    "euler": BranchKind.EULER,
}

_STRIP_RULES = {
    "alpha-cubed": StripRule.ALPHA_CUBED,
    "nu-linear": StripRule.NU_LINEAR,
}


@dataclass
class RunConfig:
    branch: Optional[BranchKind] = None
    alpha: float = 0.0
    nu: float = 0.0
    nx: int = 64
    ny: int = 64
    lx: float = 2.0 * math.pi
    dt: Optional[float] = None
    cfl_target: float = 0.5
    t_end: float = 1.0
    record_every: int = 20
    base_flow: str = "shear"
    epsilon: float = 0.05
    amplitude: float = 0.5
    family_alpha: Optional[float] = None
    strip_rule: Optional[StripRule] = None
    strip_constant: float = 1.0
    output_dir: str = "."
    seed: int = 0
    workers: int = 1
    write_snapshot: bool = False
    sweep_beta: Optional[float] = None
    sweep_coeff: float = 1.0
    sweep_alphas: tuple = ()
    sweep_resolutions: Optional[tuple] = None
    notes: list = dfield(default_factory=list)


# key -> (attribute, converter)
_SCHEMA = {
    "branch": ("branch", lambda s: _BRANCH_NAMES[s.lower()]),
    "alpha": ("alpha", float),
    "nu": ("nu", float),
    "nx": ("nx", int),
    "ny": ("ny", int),
    "lx": ("lx", float),
    "dt": ("dt", float),
    "cfl_target": ("cfl_target", float),
    "t_end": ("t_end", float),
    "record_every": ("record_every", int),
    "base_flow": ("base_flow", str),
    "epsilon": ("epsilon", float),
    "amplitude": ("amplitude", float),
    "family_alpha": ("family_alpha", float),
    "strip_rule": ("strip_rule", lambda s: _STRIP_RULES[s.lower()]),
    "strip_constant": ("strip_constant", float),
    "output_dir": ("output_dir", str),
    "seed": ("seed", int),
    "workers": ("workers", int),
    "write_snapshot": ("write_snapshot", _parse_bool),
    "sweep_beta": ("sweep_beta", float),
    "sweep_coeff": ("sweep_coeff", float),
    "sweep_alphas": ("sweep_alphas", _parse_float_list),
    "sweep_resolutions": ("sweep_resolutions", _parse_resolutions),
}


def parse_config(text, name="config"):
    """Parse and validate; raises ConfigError with line/column positions."""
    cfg = RunConfig()
    seen = {}
    branch_given = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            continue  # cosmetic section header
        if "=" not in stripped:
            col = len(raw) - len(raw.lstrip()) + 1
            raise ConfigError(f"{name}:{lineno}:{col}: expected 'key = value'")
        key_part, value_part = stripped.split("=", 1)
        key = key_part.strip().lower().replace("-", "_")
        value = value_part.strip()
        if key not in _SCHEMA:
            col = raw.find(key_part.strip()) + 1
            raise ConfigError(f"{name}:{lineno}:{col}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(
                f"{name}:{lineno}: duplicate key {key!r} (first set on line {seen[key]})"
            )
        seen[key] = lineno
        attr, conv = _SCHEMA[key]
        try:
            setattr(cfg, attr, conv(value))
        except (KeyError, ValueError) as exc:
            col = raw.find(value) + 1 if value else len(raw)
            raise ConfigError(
                f"{name}:{lineno}:{col}: bad value for {key!r}: {exc}"
            ) from None
        if key == "branch":
            branch_given = True
    _validate(cfg, branch_given, name)
    return cfg


def _validate(cfg, branch_given, name):
    def fail(message):
        raise ConfigError(f"{name}: {message}")

    if cfg.alpha < 0:
        fail("alpha must be >= 0")
    if cfg.nu < 0:
        fail("nu must be >= 0")
    if cfg.nx < 4 or cfg.nx % 2:
        fail("nx must be even and >= 4")
    if cfg.ny < 8:
        fail("ny must be >= 8")
    if cfg.lx <= 0:
        fail("lx must be positive")
    if cfg.dt is not None and cfg.dt <= 0:
        fail("dt must be positive")
    if not 0 < cfg.cfl_target <= 1:
        fail("cfl_target must lie in (0, 1]")
    if cfg.t_end < 0:
        fail("t_end must be nonnegative")
    if cfg.record_every < 1:
        fail("record_every must be >= 1")
    if cfg.strip_constant <= 0:
        fail("strip_constant must be positive")
    if cfg.workers < 1:
        fail("workers must be >= 1")
    if cfg.family_alpha is not None and cfg.family_alpha <= 0:
        fail("family_alpha must be positive")

    from .experiments import BASE_FLOWS

    if cfg.base_flow not in BASE_FLOWS:
        fail(f"unknown base flow {cfg.base_flow!r}; have {sorted(BASE_FLOWS)}")

    derived = classify_kind(cfg.alpha, cfg.nu)
    if not branch_given or cfg.branch is None:
        cfg.branch = derived
    elif cfg.branch is not derived:
        fail(
            f"branch {cfg.branch.value!r} inconsistent with alpha={cfg.alpha}, nu={cfg.nu} "
            f"(these select {derived.value!r})"
        )

    if cfg.sweep_alphas:
        if cfg.sweep_beta is None:
            fail("sweep_alphas given without sweep_beta")
        if any(a <= 0 for a in cfg.sweep_alphas):
            fail("sweep_alphas must be positive")
        if any(b >= a for a, b in zip(cfg.sweep_alphas, cfg.sweep_alphas[1:])):
            fail("sweep_alphas must be strictly decreasing")
        if cfg.sweep_resolutions is not None and len(cfg.sweep_resolutions) != len(
            cfg.sweep_alphas
        ):
            fail("sweep_resolutions length must match sweep_alphas")

    if 0 < cfg.alpha < 1 and 0 < cfg.nu < 1:
        from .experiments import classify_regime

        region = classify_regime(cfg.alpha, cfg.nu)
        if region.region == "boundary":
            cfg.notes.append(f"(alpha, nu) sits on the regime boundary {region.curve}")
        else:
            cfg.notes.append(f"(alpha, nu) lies in regime region {region.label}")


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), name=str(path))
