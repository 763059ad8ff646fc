"""Python bindings for the plasma-vacuum interface solver.

Configs may be given as JSON text, a path to a JSON file, or a dict.
"""

import json
import os

from ._pil import (
    PilError,
    flat_dn_eigenvalues,
    preset_names,
    read_series,
)
from . import _pil

__all__ = [
    "PilError",
    "flat_dn_eigenvalues",
    "preset_names",
    "read_series",
    "resolve_config",
    "restore",
    "run",
    "sweep_alpha",
    "verify_identities",
]


def _text(config):
    if isinstance(config, dict):
        return json.dumps(config)
    if isinstance(config, (str, os.PathLike)) and os.path.isfile(config):
        with open(config, encoding="utf-8") as fh:
            return fh.read()
    return str(config)


def resolve_config(config):
    out = _pil.resolve_config(_text(config))
    out["resolved"] = json.loads(out["resolved"])
    return out


def run(config, out_dir="", threads=1, cadence=0, stop_at_checkpoint=False):
    return _pil.run(_text(config), str(out_dir), threads, cadence, stop_at_checkpoint)


def restore(checkpoint, out_dir="", threads=1):
    return _pil.restore(str(checkpoint), str(out_dir), threads)


def verify_identities(config, threads=1):
    return _pil.verify_identities(_text(config), threads)


def sweep_alpha(config, alphas, out_dir="", threads=1):
    return _pil.sweep_alpha(_text(config), list(alphas), str(out_dir), threads)
