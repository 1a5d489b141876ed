"""JSON configuration documents.

Every loader rejects unknown keys and reports the offending field together
with the line it appears on. Thresholds may be given in dB (``*_db`` keys) or
linear; dB values are converted here and nowhere else.
"""

from __future__ import annotations

import dataclasses
import json
import re
from pathlib import Path
from typing import Any

from cogrelay.channel import NoiseModel, PathLossModel, db_to_linear, linear_to_db
from cogrelay.netsim import ConfigError, SimConfig
from cogrelay.relay import RelaySelectionConfig
from cogrelay.sharing import SharingInstance
from cogrelay.swarm import PsoConfig

__all__ = [
    "ConfigError",
    "Document",
    "load_document",
    "parse_instance",
    "parse_pso",
    "parse_relay",
    "parse_sim",
    "generator_params",
]


class Document:
    """A parsed JSON object plus the source text, for error locations."""

    def __init__(self, data: dict, text: str = "", path: str = "<config>"):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        self.data = data
        self.text = text
        self.path = path

    def line_of(self, key: str) -> int | None:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def error(self, key: str, message: str) -> ConfigError:
        line = self.line_of(key)
        where = f"{self.path}:{line}" if line else self.path
        err = ConfigError(f"{where}: field '{key}': {message}")
        err.path, err.line, err.field = self.path, line, key
        return err

    def section(self, key: str) -> "Document":
        value = self.data.get(key, {})
        if not isinstance(value, dict):
            raise self.error(key, "expected an object")
        return Document(value, self.text, self.path)


def load_document(path) -> Document:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e.strerror}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        err = ConfigError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}")
        err.path, err.line = path, e.lineno
        raise err from e
    return Document(data, text, path)


def _check_keys(doc: Document, allowed) -> None:
    for key in doc.data:
        if key not in allowed:
            raise doc.error(key, f"unknown field (expected one of: {', '.join(sorted(allowed))})")


def _number(doc: Document, key: str, default=None, *, integer=False, nullable=False):
    value = doc.data.get(key, default)
    if value is None and (nullable or default is None):
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise doc.error(key, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise doc.error(key, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _pair(doc: Document, key: str, default):
    value = doc.data.get(key, default)
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise doc.error(key, f"expected a pair of numbers, got {value!r}")
    return (float(value[0]), float(value[1]))


def _threshold(doc: Document, base: str, default_db: float | None = None, default_linear: float | None = None):
    """Read ``base`` (linear) or ``base_db``; both at once is an error."""
    lin, db = base in doc.data, f"{base}_db" in doc.data
    if lin and db:
        raise doc.error(f"{base}_db", f"give either '{base}' or '{base}_db', not both")
    if db:
        return db_to_linear(_number(doc, f"{base}_db"))
    if lin:
        v = _number(doc, base)
        if v < 0:
            raise doc.error(base, "must be >= 0")
        return v
    if default_linear is not None:
        return default_linear
    return db_to_linear(default_db)


def _wrap(doc: Document, fn, key_hint: str):
    try:
        return fn()
    except ConfigError:
        raise
    except ValueError as e:
        raise doc.error(key_hint, str(e)) from e


def parse_path_loss(doc: Document) -> PathLossModel:
    pl = doc.section("path_loss")
    _check_keys(pl, {"exponent", "reference_distance"})
    return _wrap(
        doc,
        lambda: PathLossModel(_number(pl, "exponent", 2.0), _number(pl, "reference_distance", 1.0)),
        "path_loss",
    )


def parse_relay(doc: Document) -> tuple[RelaySelectionConfig, int]:
    """Relay-selection settings; returns the config and the relay count."""
    _check_keys(doc, {"relay_count", "source_power", "noise_power", "snr_threshold", "snr_threshold_db"})
    m = _number(doc, "relay_count", 10, integer=True)
    if m < 0:
        raise doc.error("relay_count", "must be >= 0")
    threshold = _threshold(doc, "snr_threshold", default_db=10.0)
    cfg = _wrap(
        doc,
        lambda: RelaySelectionConfig(
            _number(doc, "source_power", 1.0), threshold, NoiseModel(_number(doc, "noise_power", 0.1))
        ),
        "source_power",
    )
    return cfg, m


_INSTANCE_KEYS = {
    "primary_links",
    "secondary_links",
    "transmit_power",
    "path_loss",
    "noise_power",
    "sinr_floor",
    "sinr_floor_db",
    "bandwidth",
    "arena",
}
_GENERATOR_KEYS = {
    "primary_count",
    "secondary_count",
    "primary_length",
    "secondary_length",
}
_SHARE_KEYS = _INSTANCE_KEYS | {"random", "pso", "method"}


def _links(doc: Document, key: str):
    raw = doc.data.get(key, [])
    if not isinstance(raw, list):
        raise doc.error(key, "expected a list of {tx: [x, y], rx: [x, y]} objects")
    out = []
    for n, item in enumerate(raw):
        try:
            tx, rx = item["tx"], item["rx"]
            out.append(((float(tx[0]), float(tx[1])), (float(rx[0]), float(rx[1]))))
        except (TypeError, KeyError, IndexError, ValueError) as e:
            raise doc.error(key, f"entry {n} is not a {{tx: [x, y], rx: [x, y]}} object") from e
    return out


def _instance_common(doc: Document) -> dict:
    return {
        "transmit_power": _number(doc, "transmit_power", 1.0),
        "path_loss": parse_path_loss(doc),
        "noise": _wrap(doc, lambda: NoiseModel(_number(doc, "noise_power", 1e-7)), "noise_power"),
        "sinr_floor": _threshold(doc, "sinr_floor", default_db=10.0),
        "bandwidth": _number(doc, "bandwidth", 1e6),
        "arena": _pair(doc, "arena", (1000.0, 1000.0)),
    }


def parse_instance(doc: Document) -> SharingInstance:
    """An explicit instance: link endpoints plus radio parameters."""
    _check_keys(doc, _SHARE_KEYS)
    common = _instance_common(doc)
    return _wrap(
        doc,
        lambda: SharingInstance(
            primary_links=_links(doc, "primary_links"),
            secondary_links=_links(doc, "secondary_links"),
            **common,
        ),
        "primary_links",
    )


def generator_params(doc: Document) -> dict | None:
    """Keyword arguments for ``sharing.random_instance`` when the document has a
    ``random`` section, else None."""
    _check_keys(doc, _SHARE_KEYS)
    if "random" not in doc.data:
        return None
    gen = doc.section("random")
    _check_keys(gen, _GENERATOR_KEYS)
    params = _instance_common(doc)
    params["primary_count"] = _number(gen, "primary_count", 2, integer=True)
    params["secondary_count"] = _number(gen, "secondary_count", 10, integer=True)
    params["primary_length"] = _pair(gen, "primary_length", (20.0, 80.0))
    params["secondary_length"] = _pair(gen, "secondary_length", (20.0, 80.0))
    for key in ("primary_count", "secondary_count"):
        if params[key] < 0:
            raise gen.error(key, "must be >= 0")
    return params


def parse_pso(doc: Document, seed: int = 0) -> PsoConfig:
    pso = doc.section("pso")
    fields = {f.name for f in dataclasses.fields(PsoConfig)} - {"seed"}
    _check_keys(pso, fields)
    kwargs: dict[str, Any] = {}
    for name in fields:
        if name in pso.data:
            integer = name in ("swarm_size", "iterations")
            kwargs[name] = _number(pso, name, integer=integer, nullable=name == "infeasibility_penalty")
    return _wrap(pso, lambda: PsoConfig(seed=seed, **kwargs), next(iter(pso.data), "pso"))


_SIM_EXTRA = {"node_levels", "policies"}


def parse_sim(doc: Document, **overrides) -> SimConfig:
    """SimConfig from a document; ``snr_threshold`` may be linear or dB."""
    names = {f.name for f in dataclasses.fields(SimConfig)}
    _check_keys(doc, names | {"snr_threshold"} | _SIM_EXTRA)
    kwargs: dict[str, Any] = {}
    integers = {"node_count", "packet_size", "seed", "relay_count", "primary_count", "queue_limit"}
    nullable = {"relay_count", "noise_power", "queue_limit"}
    for name in names:
        if name not in doc.data or name == "snr_threshold_db":
            continue
        if name in ("arena", "speed_range"):
            kwargs[name] = _pair(doc, name, None)
        elif name == "policy":
            kwargs[name] = doc.data[name]
        else:
            kwargs[name] = _number(doc, name, integer=name in integers, nullable=name in nullable)
    if "snr_threshold" in doc.data or "snr_threshold_db" in doc.data:
        _threshold(doc, "snr_threshold")  # rejects giving both
        if "snr_threshold_db" in doc.data:
            kwargs["snr_threshold_db"] = _number(doc, "snr_threshold_db")
        else:
            lin = _number(doc, "snr_threshold")
            if not lin > 0:
                raise doc.error("snr_threshold", "must be > 0 for the simulator")
            kwargs["snr_threshold_db"] = float(linear_to_db(lin))
    kwargs.update(overrides)
    try:
        return SimConfig(**kwargs)
    except ConfigError as e:
        key = next((k for k in kwargs if k in str(e)), "node_count")
        raise doc.error(key, str(e)) from e


def sim_extras(doc: Document) -> dict:
    out = {}
    if "node_levels" in doc.data:
        levels = doc.data["node_levels"]
        if not isinstance(levels, list) or not levels or not all(isinstance(v, int) for v in levels):
            raise doc.error("node_levels", "expected a non-empty list of integers")
        out["node_levels"] = levels
    if "policies" in doc.data:
        pols = doc.data["policies"]
        if not isinstance(pols, list) or not all(isinstance(p, str) for p in pols):
            raise doc.error("policies", "expected a list of policy names")
        out["policies"] = pols
    return out
