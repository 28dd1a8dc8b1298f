"""Pipeline configuration and its JSON form.

Unspecified keys take their defaults; unknown keys are rejected so typos do
not silently fall back to defaults.
"""
import dataclasses
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .descriptors import ProviderConfig
from .dogdetect import ScaleSpaceParams
from .errors import ConfigError
from .selection import SelectionParams
from .svm import SvmParams

_SECTIONS = {
    "scale_space": ScaleSpaceParams,
    "selection": SelectionParams,
    "provider": ProviderConfig,
    "svm": SvmParams,
}


@dataclass(frozen=True)
class PipelineConfig:
    scale_space: ScaleSpaceParams = field(default_factory=ScaleSpaceParams)
    selection: SelectionParams = field(default_factory=SelectionParams)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    nbins: int = 50
    kmeans_seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-6
    svm: SvmParams = field(default_factory=SvmParams)

    def __post_init__(self):
        if self.nbins < 2:
            raise ConfigError("nbins must be >= 2")
        if self.kmeans_max_iter < 1 or self.kmeans_tol < 0:
            raise ConfigError("kmeans_max_iter must be >= 1 and kmeans_tol >= 0")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            section = _SECTIONS.get(key)
            if section is None:
                kwargs[key] = value
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            names = {f.name for f in fields(section)}
            bad = set(value) - names
            if bad:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
            try:
                kwargs[key] = section(**value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {key!r} section: {exc}") from exc
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def with_sweep_row(self, dist_th, min_over, top_n, nbins):
        """Copy with the four swept parameters replaced."""
        sel = replace(self.selection, dist_th=float(dist_th), min_over=int(min_over), top_n=int(top_n))
        return replace(self, selection=sel, nbins=int(nbins))


def load_config(path):
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return PipelineConfig.from_dict(data)


def save_config(config, path):
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
