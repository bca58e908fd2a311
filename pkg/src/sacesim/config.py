"""Experiment configuration: an INI-style document with five flat sections.

    [model]    a0 a1 a2 a3 drift
    [noise]    kind decay beta
    [scheme]   variant N tau K tau_cap
    [initial]  preset coeffs scale preset_b coeffs_b scale_b
    [run]      M master_seed save_stride functional output format
               tau_list tau_ref n_list n_ref p burn_in
"""
from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError, DomainError
from .functionals import FunctionalSpec
from .noise import NoiseSpectrum, regularity_check
from .operators import ModelParams
from .scheme import SchemeConfig, initial_field
from .spectral import SpectralField, eigenvalue

DEFAULTS = {
    "model": {"a0": "0", "a1": "1", "a2": "0", "a3": "1", "drift": "true"},
    "noise": {"kind": "power_law", "decay": "1", "beta": "1"},
    "scheme": {"variant": "tamed_exp_euler", "N": "64", "tau": "0.1", "K": "10", "tau_cap": "1"},
    "initial": {
        "preset": "zero", "coeffs": "", "scale": "1",
        "preset_b": "zero", "coeffs_b": "", "scale_b": "1",
    },
    "run": {
        "M": "1000", "master_seed": "0", "save_stride": "1", "functional": "exp_neg_sq",
        "output": "", "format": "csv",
        "tau_list": "0.0625,0.03125,0.015625,0.0078125,0.00390625",
        "tau_ref": "0.00048828125", "n_list": "4,8,16,32", "n_ref": "256",
        "p": "2,4", "burn_in": "auto",
    },
}

FORMATS = ("csv", "json")


@dataclass
class RunSettings:
    M: int
    master_seed: int
    save_stride: int
    functional: FunctionalSpec
    output: str
    format: str
    tau_list: list
    tau_ref: float
    n_list: list
    n_ref: int
    p: list
    burn_in: Optional[float]


@dataclass
class ExperimentConfig:
    params: Optional[ModelParams]
    spectrum: NoiseSpectrum
    scheme: SchemeConfig
    u0: SpectralField
    u0_b: SpectralField
    run: RunSettings
    echo: dict = field(default_factory=dict)

    @property
    def drift(self) -> bool:
        return self.params is not None

    def with_seed(self, seed: int) -> ExperimentConfig:
        self.run.master_seed = int(seed)
        self.echo["run.master_seed"] = str(int(seed))
        return self


def _floats(text):
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _initial(sec, suffix, n_modes):
    preset = sec["preset" + suffix]
    coeffs = _floats(sec["coeffs" + suffix]) if sec["coeffs" + suffix].strip() else None
    if coeffs is not None and preset == "zero":
        preset = "coeffs"
    return initial_field(preset, n_modes, float(sec["scale" + suffix]), coeffs)


def parse_config(text: str) -> ExperimentConfig:
    """Validate a configuration document and apply defaults.

    Raises ConfigError for unknown sections or keys, malformed values, a
    drift violating L_F < lambda_1, or an inadmissible noise regularity.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    unknown = [s for s in cp.sections() if s not in DEFAULTS]
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    bad_keys = [
        f"{s}.{k}" for s in cp.sections() for k in cp[s] if k not in DEFAULTS[s]
    ]
    if bad_keys:
        raise ConfigError(f"unknown keys: {', '.join(bad_keys)}")

    merged = {s: dict(DEFAULTS[s], **(dict(cp[s]) if cp.has_section(s) else {})) for s in DEFAULTS}
    echo = {f"{s}.{k}": v for s in merged for k, v in merged[s].items()}
    m, nz, sc, ini, rn = (merged[s] for s in ("model", "noise", "scheme", "initial", "run"))

    try:
        params = None
        if _bool(m["drift"]):
            params = ModelParams(float(m["a0"]), float(m["a1"]), float(m["a2"]), float(m["a3"]))
        N = int(sc["N"])
        beta = float(nz["beta"])
        if nz["kind"] == "white":
            spectrum = NoiseSpectrum.white(N, beta)
        else:
            spectrum = NoiseSpectrum(nz["kind"], float(nz["decay"]), beta, N)
        scheme = SchemeConfig(N, float(sc["tau"]), int(sc["K"]), beta, sc["variant"], float(sc["tau_cap"]))
        u0 = _initial(ini, "", N)
        u0_b = _initial(ini, "_b", N)
        fmt = rn["format"].strip().lower()
        if fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        burn = rn["burn_in"].strip().lower()
        run = RunSettings(
            M=int(rn["M"]),
            master_seed=int(rn["master_seed"]),
            save_stride=int(rn["save_stride"]),
            functional=FunctionalSpec.parse(rn["functional"]),
            output=rn["output"].strip(),
            format=fmt,
            tau_list=_floats(rn["tau_list"]),
            tau_ref=float(rn["tau_ref"]),
            n_list=_ints(rn["n_list"]),
            n_ref=int(rn["n_ref"]),
            p=_ints(rn["p"]),
            burn_in=None if burn in ("", "auto") else float(burn),
        )
    except ConfigError:
        raise
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    if params is not None and params.lipschitz_onesided >= eigenvalue(1):
        raise ConfigError(
            f"dissipativity assumption violated: L_F = {params.lipschitz_onesided:g} "
            f">= lambda_1 = pi^2 ~ {eigenvalue(1):.6g}"
        )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reg = regularity_check(spectrum)
    if not reg.admissible:
        raise ConfigError(
            f"noise regularity violated: sum lambda_k^(beta-1) q_k diverges "
            f"(tail exponent {reg.tail_exponent:g} >= -1) for {spectrum.kind} noise, beta={beta}"
        )
    if run.M < 1:
        raise ConfigError("run.M must be positive")
    if run.save_stride < 1 or (scheme.n_steps and scheme.n_steps % run.save_stride):
        raise ConfigError("run.save_stride must divide scheme.K")
    return ExperimentConfig(params, spectrum, scheme, u0, u0_b, run, echo)


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def check_divides(coarse: float, fine: float, what: str) -> int:
    r = coarse / fine
    n = int(round(r))
    if n < 1 or not math.isclose(r, n, rel_tol=1e-9):
        raise ConfigError(f"{what}: {fine} does not divide {coarse}")
    return n
