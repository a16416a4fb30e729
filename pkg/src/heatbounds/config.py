"""Experiment configuration: INI parsing, validation, bundled presets.

A configuration is a flat key = value file with one section per pipeline
stage.  Validation happens before any computation and collects all
field-level problems; the canonical JSON form of the parsed values is
hashed into every report for reproducibility.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

PRESET_NAMES = ("ou", "subexp_alpha3", "cauchy_a1", "heat_baseline")

_DEFAULTS = {
    "potential": {"family": "quadratic", "kappa": 1.0, "alpha": 3.0, "dim": 1,
                  "norm_radius": 20.0},
    "weight": {"beta": 0.0},
    "hypothesis": {"enabled": True, "alpha": 2.0, "c": 1.0, "delta": 1.0,
                   "cauchy": False, "eps_tol": 0.05},
    "lyapunov": {"enabled": True, "mode": "auto", "gamma": 0.0,
                 "form": "exp_power", "a": 0.0, "alpha": 2.0,
                 "xi": "identity", "xi_b": 0.9, "phi_exponent": 2.0,
                 "phi_c": 0.0, "smoothing_radius": 1.0},
    "grid": {"n": 400, "radius": 6.0, "truncation_tol": 1e-6},
    "spi": {"enabled": True, "s_min": 1e-3, "s_max": 1e-1, "s_points": 13,
            "restarts": 20, "max_iter": 10000, "baseline": False,
            "p_override": 0.0},
    "kernel": {"enabled": True, "epsilon": 0.5,
               "t_ondiag_min": 0.05, "t_ondiag_max": 0.5, "t_ondiag_points": 9,
               "t_offdiag_min": 0.02, "t_offdiag_max": 1.0, "t_offdiag_points": 13,
               "t_long_min": 1.0, "t_long_max": 10.0, "t_long_points": 10,
               "pair_window": 3.0, "pair_stride": 8,
               "poincare_omega": "one", "twist_enabled": True,
               "twist_a": "0 0.5 1 2", "twist_t_min": 0.02, "twist_t_max": 0.8,
               "twist_t_points": 10},
    "mc": {"enabled": True, "n_paths": 100000, "dt": 1e-3, "t": 0.5, "x0": 1.0},
    "tolerances": {"ondiag_slope_margin": 0.3, "offdiag_decade_cap": 3.0,
                   "longtime_gap_fraction": 0.9, "twist_quad_lo": 0.5,
                   "twist_quad_hi": 1.2, "mc_l1": 0.05, "spi_slope_margin": 0.3,
                   "domination_min_ratio": 1.0, "invariant_stochasticity": 1e-8,
                   "invariant_ck": 1e-8, "invariant_lambda0": 1e-10,
                   "invariant_orthonormality": 1e-10,
                   "poincare_refinement": 0.1},
    "output": {"seed": 1234},
}

_BOOL_KEYS = {"enabled", "cauchy", "baseline", "twist_enabled"}
_INT_KEYS = {"n", "dim", "s_points", "restarts", "max_iter", "n_paths", "seed",
             "t_ondiag_points", "t_offdiag_points", "t_long_points",
             "pair_stride", "twist_t_points"}
_STR_KEYS = {"family", "mode", "form", "xi", "poincare_omega", "twist_a"}


def _coerce(key: str, raw: str):
    if key in _BOOL_KEYS:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(raw)
    if key in _STR_KEYS:
        return raw.strip()
    return float(raw)


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)

    @classmethod
    def from_ini_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read_string(text)
        sections = {name: dict(vals) for name, vals in _DEFAULTS.items()}
        for sec in parser.sections():
            if sec not in sections:
                raise ConfigError([f"unknown section [{sec}]"])
            for key, raw in parser.items(sec):
                if key not in sections[sec]:
                    raise ConfigError([f"unknown key '{key}' in section [{sec}]"])
                try:
                    sections[sec][key] = _coerce(key, raw)
                except ValueError:
                    raise ConfigError([f"[{sec}] {key}: cannot parse '{raw}'"]) from None
        return cls(sections=sections)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_ini_text(Path(path).read_text())

    @classmethod
    def from_preset(cls, name: str) -> "ExperimentConfig":
        if name not in PRESET_NAMES:
            raise ConfigError([f"unknown preset '{name}'; available: {', '.join(PRESET_NAMES)}"])
        text = resources.files("heatbounds").joinpath(f"presets/{name}.ini").read_text()
        return cls.from_ini_text(text)

    @classmethod
    def load(cls, spec: str) -> "ExperimentConfig":
        """Resolve a CLI --config value: a file path or a bundled preset name."""
        p = Path(spec)
        if p.exists():
            return cls.from_file(p)
        if spec in PRESET_NAMES:
            return cls.from_preset(spec)
        raise ConfigError([f"config '{spec}' is neither a file nor a preset "
                           f"({', '.join(PRESET_NAMES)})"])

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def to_canonical_dict(self) -> dict:
        return {sec: dict(sorted(vals.items())) for sec, vals in sorted(self.sections.items())}

    def config_hash(self) -> str:
        payload = json.dumps(self.to_canonical_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def twist_a_values(self):
        return [float(tok) for tok in self["kernel"]["twist_a"].split()]

    # ------------------------------------------------------------------
    def validate(self) -> list:
        """All field-level problems; empty list means the config is runnable."""
        errors = []
        pot = self["potential"]
        if pot["family"] not in ("quadratic", "power_exponential",
                                 "generalized_cauchy", "flat"):
            errors.append(f"[potential] unknown family '{pot['family']}'")
        if pot["family"] == "quadratic" and pot["kappa"] <= 0:
            errors.append("[potential] kappa must be > 0")
        if pot["family"] in ("power_exponential", "generalized_cauchy") and pot["alpha"] <= 0:
            errors.append("[potential] alpha must be > 0")
        if pot["norm_radius"] <= 0:
            errors.append("[potential] norm_radius must be > 0")
        if pot["dim"] != 1:
            errors.append("[potential] numerics require dim = 1")

        hyp = self["hypothesis"]
        if hyp["enabled"]:
            if hyp["c"] <= 0:
                errors.append("[hypothesis] c must be > 0")
            if hyp["alpha"] <= 0:
                errors.append("[hypothesis] alpha must be > 0")
            if hyp["delta"] < 0:
                errors.append("[hypothesis] delta must be >= 0")
            if not 0 < hyp["eps_tol"] < 1:
                errors.append("[hypothesis] eps_tol must be in (0, 1)")

        lya = self["lyapunov"]
        if lya["enabled"]:
            if lya["mode"] not in ("auto", "explicit"):
                errors.append("[lyapunov] mode must be auto or explicit")
            if lya["mode"] == "auto":
                if lya["gamma"] < 0:
                    errors.append("[lyapunov] gamma must be >= 0")
                elif hyp["enabled"] and lya["gamma"] <= 1.0 - hyp["alpha"]:
                    errors.append(
                        f"[lyapunov] rate exponent would be <= 0: need "
                        f"gamma > 1 - alpha (gamma={lya['gamma']}, alpha={hyp['alpha']})")
            else:
                if lya["form"] not in ("exp_power", "pure_power"):
                    errors.append("[lyapunov] form must be exp_power or pure_power")
                if lya["a"] <= 0:
                    errors.append("[lyapunov] a must be > 0 in explicit mode")
                if lya["form"] == "pure_power" and lya["smoothing_radius"] <= 1.0:
                    errors.append("[lyapunov] pure_power needs smoothing_radius > 1")
                if lya["xi"] not in ("identity", "log_power", "power_tail"):
                    errors.append("[lyapunov] xi must be identity, log_power or power_tail")
                if lya["xi"] == "power_tail" and not 0 <= lya["xi_b"] < 1:
                    errors.append("[lyapunov] power_tail exponent must be in [0, 1)")
                if lya["phi_exponent"] <= 0:
                    errors.append("[lyapunov] phi_exponent must be > 0")

        grid = self["grid"]
        if grid["n"] < 100:
            errors.append("[grid] n must be >= 100")
        if grid["radius"] <= 0:
            errors.append("[grid] radius must be > 0")
        if not 0 < grid["truncation_tol"] < 0.5:
            errors.append("[grid] truncation_tol must be in (0, 0.5)")

        spi = self["spi"]
        if spi["enabled"]:
            if not 0 < spi["s_min"] < spi["s_max"]:
                errors.append("[spi] need 0 < s_min < s_max")
            if spi["s_points"] < 2:
                errors.append("[spi] s_points must be >= 2")
            if grid["n"] < 200:
                errors.append("[spi] empirical constants need grid n >= 200")
            if spi["baseline"] and spi["p_override"] <= 0:
                errors.append("[spi] baseline mode needs p_override > 0")

        ker = self["kernel"]
        if ker["enabled"]:
            baseline = self["potential"]["family"] == "flat"
            if ker["epsilon"] < 0:
                errors.append("[kernel] epsilon must be >= 0")
            elif ker["epsilon"] == 0 and not baseline:
                errors.append("[kernel] epsilon must be > 0 (epsilon = 0 only for the "
                              "flat heat baseline)")
            for prefix in ("t_ondiag", "t_offdiag", "t_long", "twist_t"):
                if ker[f"{prefix}_min"] <= 0 or ker[f"{prefix}_max"] <= ker[f"{prefix}_min"]:
                    errors.append(f"[kernel] need 0 < {prefix}_min < {prefix}_max")
                if ker[f"{prefix}_points"] < 3:
                    errors.append(f"[kernel] {prefix}_points must be >= 3")
            if ker["pair_window"] > grid["radius"]:
                errors.append("[kernel] pair_window cannot exceed the grid radius")
            if ker["pair_stride"] < 1:
                errors.append("[kernel] pair_stride must be >= 1")
            if ker["poincare_omega"] not in ("one", "one_plus_x2", "lyapunov"):
                errors.append("[kernel] poincare_omega must be one, one_plus_x2 or lyapunov")
            try:
                self.twist_a_values()
            except ValueError:
                errors.append("[kernel] twist_a must be a space-separated list of numbers")

        mc = self["mc"]
        if mc["enabled"]:
            if mc["n_paths"] < 1:
                errors.append("[mc] n_paths must be >= 1")
            if mc["dt"] <= 0:
                errors.append("[mc] dt must be > 0")
            if mc["t"] < 0:
                errors.append("[mc] t must be >= 0")

        tol = self["tolerances"]
        for key, val in tol.items():
            if val <= 0:
                errors.append(f"[tolerances] {key} must be > 0")

        return errors
