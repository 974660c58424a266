"""INI-style scenario/experiment configuration.

Sections and keys (all optional)::

    [geometry]   M N L K bs_position ris_positions ue_area altitude_gap
                 d_B_over_lambda d_R_over_lambda ris_row_length
    [radio]      ul_power_w dl_power_w rho_ul rho_d tau_c tau_p link_mode seed
    [phase]      a_min b phi
    [pathloss]   any PathLossConfig field
    [experiment] regime sizes n_large n_small mc_samples split_fractions
                 estimators epochs batch lr seed flat_split ue_index n_bootstrap out_dir

Points are written ``x,y`` and lists of points ``x,y; x,y``.  Angles accept
a ``pi`` suffix, e.g. ``phi = 0.43pi``.
"""

from __future__ import annotations

import configparser
import dataclasses

import numpy as np

from .channel_model import PathLossConfig, PhaseShiftConfig, Scenario, snr_from_power
from .pipeline import ExperimentConfig


def _float(text: str) -> float:
    text = text.strip()
    if text.endswith("pi"):
        coef = text[:-2].strip().rstrip("*") or "1"
        return float(coef) * np.pi
    return float(text)


def _point(text: str) -> tuple:
    return tuple(_float(v) for v in text.split(","))


def _points(text: str) -> tuple:
    return tuple(_point(p) for p in text.split(";") if p.strip())


def _bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


_GEOMETRY = {"M": int, "N": int, "L": int, "K": int, "bs_position": _point,
             "ris_positions": _points, "ue_area": _points, "altitude_gap": _float,
             "d_B_over_lambda": _float, "d_R_over_lambda": _float, "ris_row_length": int}
_RADIO = {"rho_ul": _float, "rho_d": _float, "tau_c": int, "tau_p": int,
          "link_mode": str.strip, "seed": int}
_EXPERIMENT = {"regime": str.strip, "sizes": lambda t: [tuple(int(v) for v in p) for p in _points(t)],
               "n_large": int, "n_small": int, "mc_samples": int, "split_fractions": _point,
               "estimators": lambda t: tuple(e.strip() for e in t.split(",") if e.strip()),
               "epochs": int, "batch": int, "lr": _float, "seed": int, "flat_split": _bool,
               "ue_index": int, "n_bootstrap": int, "out_dir": str.strip}


def _section(parser, name, schema):
    if not parser.has_section(name):
        return {}
    out = {}
    for key, raw in parser.items(name):
        if key not in schema:
            raise ValueError(f"unknown key [{name}] {key}")
        out[key] = schema[key](raw)
    return out


def parse_config(text: str) -> tuple[Scenario, dict]:
    """Scenario plus the raw [experiment] overrides."""
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep M/N/K case
    parser.read_string(text)
    unknown = set(parser.sections()) - {"geometry", "radio", "phase", "pathloss", "experiment"}
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")

    pl_fields = {f.name: _float for f in dataclasses.fields(PathLossConfig)}
    pathloss = PathLossConfig(**_section(parser, "pathloss", pl_fields))
    phase = PhaseShiftConfig(**_section(parser, "phase", {"a_min": _float, "b": _float, "phi": _float}))

    scen = _section(parser, "geometry", _GEOMETRY)
    radio_schema = dict(_RADIO, ul_power_w=_float, dl_power_w=_float)
    radio = _section(parser, "radio", radio_schema)
    ul = radio.pop("ul_power_w", 0.1)
    dl = radio.pop("dl_power_w", 10.0)
    radio.setdefault("rho_ul", snr_from_power(ul, pathloss.noise_power_dbm))
    radio.setdefault("rho_d", snr_from_power(dl, pathloss.noise_power_dbm))
    scen.update(radio)
    if "L" in scen and "ris_positions" not in scen:
        default = Scenario.__dataclass_fields__["ris_positions"].default
        scen["ris_positions"] = tuple(default[i % len(default)] for i in range(scen["L"]))
    scenario = Scenario(phase_cfg=phase, pathloss_cfg=pathloss, **scen)
    return scenario, _section(parser, "experiment", _EXPERIMENT)


def load_config(path) -> tuple[Scenario, dict]:
    with open(path) as fh:
        return parse_config(fh.read())


def experiment_from(scenario: Scenario, overrides: dict, **cli) -> ExperimentConfig:
    """Merge config-file overrides with non-None command-line values."""
    kw = dict(overrides)
    kw.update({k: v for k, v in cli.items() if v is not None})
    return ExperimentConfig(scenario=scenario, **kw)
