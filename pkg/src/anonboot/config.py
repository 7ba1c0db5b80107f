"""INI configuration files mirroring the protocol and experiment configs.

Recognized sections and keys (all optional; CLI flags override file values):

    [pulse]
    pulse_length = 12
    negotiation_length = 3
    difficulty_bits = 8
    pow_scheme = hash256
    service_ttl = 2
    capacity = 0.25

    [chain]
    max_block_weight = 4000000
    message_weight = 901
    capacity = 0.10
    filler_ratio = 0.0
    filler_weight = 560

    [infiltration]
    repository_size = 1000
    trials = 100000
    fractions = 0.0, 0.05, 0.1, 1/3
    sizes = 4, 16, 31, 100
    threshold = 1/3
    threshold_mode = ceil
    seed = 0

Fractional values accept both decimal ("0.05") and ratio ("1/3") notation.
"""

from __future__ import annotations

import configparser
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError

_INT_KEYS = {
    "pulse_length", "negotiation_length", "difficulty_bits", "service_ttl",
    "max_block_weight", "message_weight", "filler_weight",
    "repository_size", "trials", "seed",
}
_FRACTION_KEYS = {"capacity", "threshold", "filler_ratio"}
_FRACTION_LIST_KEYS = {"fractions"}
_INT_LIST_KEYS = {"sizes"}


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse fraction {text!r}") from exc


def load_config(path: str | Path) -> dict[str, dict]:
    """Parse an INI file into {section: {key: typed value}}."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    result: dict[str, dict] = {}
    for section in parser.sections():
        values: dict = {}
        for key, raw in parser.items(section):
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FRACTION_KEYS:
                values[key] = parse_fraction(raw)
            elif key in _FRACTION_LIST_KEYS:
                values[key] = tuple(
                    parse_fraction(part) for part in raw.split(",") if part.strip()
                )
            elif key in _INT_LIST_KEYS:
                values[key] = tuple(
                    int(part) for part in raw.split(",") if part.strip()
                )
            else:
                values[key] = raw.strip()
        result[section] = values
    return result


def setting(cli_value, file_section: dict | None, key: str, default):
    """Effective value: explicit CLI flag, else config file, else default."""
    if cli_value is not None:
        return cli_value
    if file_section and key in file_section:
        return file_section[key]
    return default
