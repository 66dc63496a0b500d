"""Python access to the vsat subtitle checker."""

import json
from os import PathLike
from typing import Dict, Optional, Union

from . import _vsat
from ._vsat import (
    BRIGHTNESS_THRESHOLD,
    EVENT_THRESHOLD,
    MAX_CPL,
    OVERLAP_THRESHOLD,
    TIME_SYNC_THRESHOLD,
    Cue,
    VsatError,
    cosine_bow,
    cpl_flags,
    event_flags,
    font_color_for_brightness,
    overlap_flags,
    parse_cues,
    round_trip,
    saliency,
    serialize_cues,
    split_cue,
    time_sync_flags,
)

__version__ = _vsat.__version__

Path = Union[str, PathLike]


def error_code(exc: VsatError) -> str:
    """The machine-readable code of a VsatError, e.g. "parse_error"."""
    return str(exc).split(":", 1)[0]


def suber(hyp: str, ref: str, fmt: str = "srt", shift_pass: bool = True) -> dict:
    return json.loads(_vsat.suber(hyp, ref, fmt, shift_pass))


def make_synthetic_corpus(seed: int, directory: Path, faults: bool = True) -> dict:
    return json.loads(_vsat.make_synthetic_corpus(seed, directory, faults))


def check(subs: Path, assets: Optional[Path] = None, config: Optional[Path] = None,
          overrides: Optional[Dict[str, str]] = None, out_dir: Path = ".") -> dict:
    """Runs the detectors; `assets` is a directory of pre-extracted per-cue audio and frames."""
    return json.loads(_vsat.check(subs, assets, config, overrides or {}, out_dir))


def fix(subs: Path, report: Path, config: Optional[Path] = None, overrides: Optional[Dict[str, str]] = None,
        out_dir: Path = ".") -> dict:
    return json.loads(_vsat.fix(subs, report, config, overrides or {}, out_dir))


def evaluate(ref: Path, hyp: Path, stages: bool = False, report: Optional[Path] = None,
             labels: Optional[Path] = None, shift_pass: bool = True) -> dict:
    return json.loads(_vsat.evaluate(ref, hyp, stages, report, labels, shift_pass))
