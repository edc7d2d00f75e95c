"""Python interface to the distillab core."""

import json
import os
from typing import Any, Dict, Mapping, Optional

from ._core import (
    Camera,
    ConfigError,
    NoiseSchedule,
    RenderConfig,
    Scene,
    VoxelField,
    __version__,
    bake_scene,
    camera_grid,
    ddim_plan,
    ddim_step,
    eps_to_x0,
    gaussian_blur,
    generate_scene,
    leakage,
    load_field,
    load_scene,
    mse,
    optimizable_field,
    perceptual_dist,
    psnr,
    q_sample,
    read_ppm,
    render_view,
    set_threads,
    split_bands,
    ssim,
    threads,
    write_ppm,
    x0_to_eps,
)
from . import _core


def default_config() -> Dict[str, Any]:
    """The full default experiment config as a nested dict."""
    return json.loads(_core.default_config_json())


def _merge(base: Dict[str, Any], extra: Mapping[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def make_config(overrides: Optional[Mapping[str, Any]] = None, **dotted: Any) -> Dict[str, Any]:
    """Defaults merged with a nested dict, then dotted keyword overrides.

    Keyword names use double underscores for dots: ``distill__cfg_scale=19.0``.
    Unknown keys raise ConfigError.
    """
    cfg = _merge(default_config(), overrides or {})
    for key, value in dotted.items():
        node = cfg
        parts = key.split("__")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise ConfigError(f"unknown key '{key}'")
            node = node[p]
        if parts[-1] not in node:
            raise ConfigError(f"unknown key '{key}'")
        node[parts[-1]] = value
    return json.loads(_core.normalize_config_json(json.dumps(cfg)))


def run_experiment(config: Mapping[str, Any]) -> Dict[str, Any]:
    """Runs one experiment and returns its held-out metrics."""
    out = _core.run_experiment_json(json.dumps(make_config(config)))
    out["output_dir"] = os.fspath(out["output_dir"])
    return out


def cli(*args: str) -> int:
    """Runs the command-line tool in-process and returns its exit code."""
    return _core.cli([str(a) for a in args])
