"""
Configuration file loading for the induced-coherence toolkit.

Config files are INI-style with an ``[experiment]`` section (fields of
:class:`ExperimentParams`, ``v2`` accepted in place of ``gain``) and a
``[detection]`` section (fields of :class:`DetectionParams`)::

    [experiment]
    v2 = 1e-4
    gamma_mag = 0.855

    [detection]
    integration_time = 30
    rng_seed = 7
"""

import configparser
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .errors import ConfigError
from .models import DetectionParams, ExperimentParams, validate, validate_detection

logger = logging.getLogger(__name__)

SECTIONS = ("experiment", "detection")

EXPERIMENT_KEYS = frozenset(ExperimentParams.model_fields) | {"v2"}
DETECTION_KEYS = frozenset(DetectionParams.model_fields)


def _section(parser: configparser.ConfigParser, name: str) -> Dict[str, str]:
    if not parser.has_section(name):
        return {}
    return {key: value.strip() for key, value in parser.items(name)}


def _given(raw: Dict[str, str]) -> Dict[str, Any]:
    # an empty value means "use the default"
    return {key: value for key, value in raw.items() if value != ""}


def _layer(
    experiment: Dict[str, Any], detection: Dict[str, Any], values: Mapping[str, Any]
) -> None:
    for key, value in values.items():
        if value is None:
            continue
        if key in EXPERIMENT_KEYS:
            if key == "gain":
                experiment.pop("v2", None)
            elif key == "v2":
                experiment.pop("gain", None)
            experiment[key] = value
        elif key in DETECTION_KEYS:
            detection[key] = value
        else:
            raise ConfigError(f"unknown parameter '{key}'", {"field": key})


def parse_config(text: str, source: str = "<string>") -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Raw experiment and detection mappings from INI text.

    Raises:
        ConfigError: on syntax errors, unknown sections or unknown keys.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}", {"source": source}) from None
    unknown_sections = [s for s in parser.sections() if s not in SECTIONS]
    if unknown_sections:
        raise ConfigError(
            f"unknown section(s) {unknown_sections} in {source}",
            {"source": source, "sections": unknown_sections},
        )
    experiment = _section(parser, "experiment")
    detection = _section(parser, "detection")
    for keys, raw, name in (
        (EXPERIMENT_KEYS, experiment, "experiment"),
        (DETECTION_KEYS, detection, "detection"),
    ):
        unknown = sorted(set(raw) - keys)
        if unknown:
            raise ConfigError(
                f"unknown key(s) {unknown} in [{name}] of {source}",
                {"source": source, "section": name, "keys": unknown},
            )
    return _given(experiment), _given(detection)


def build_params(
    experiment: Mapping[str, Any],
    detection: Mapping[str, Any],
    overrides: Optional[Mapping[str, Any]] = None,
) -> Tuple[ExperimentParams, DetectionParams]:
    """Validate raw mappings, letting ``overrides`` win over file values.

    Override keys are routed to whichever model owns them; setting ``gain``
    drops a file-level ``v2`` and vice versa.
    """
    experiment = dict(experiment)
    detection = dict(detection)
    _layer(experiment, detection, overrides or {})
    return validate(experiment), validate_detection(detection)


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    base: Optional[Tuple[ExperimentParams, DetectionParams]] = None,
) -> Tuple[ExperimentParams, DetectionParams]:
    """Read and validate a config file; ``None`` gives the defaults plus overrides.

    ``base`` replaces the model defaults underneath the file values, e.g. a
    calibrated source and detector.

    Raises:
        ConfigError: unreadable file, unknown section/key, non-numeric value.
        RangeError: a value outside its allowed range.
    """
    experiment: Dict[str, Any] = {}
    detection: Dict[str, Any] = {}
    if base is not None:
        params, det = base
        experiment = params.model_dump(exclude={"v2"})
        detection = {k: v for k, v in det.model_dump().items() if v is not None}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}", {"path": str(path)})
        from_file = parse_config(text, str(path))
        _layer(experiment, detection, {**from_file[0], **from_file[1]})
        logger.info("loaded config %s", path)
    return build_params(experiment, detection, overrides)
