"""Pipeline configuration: every tunable constant in one serializable record."""

import dataclasses
import json
from dataclasses import dataclass

from .errors import ValidationError

# JSON uses "lambda" for the smoothness weight; that's a Python keyword, so the
# dataclass field is called smooth_lambda.
_JSON_ALIASES = {"lambda": "smooth_lambda"}


@dataclass
class PipelineConfig:
    # pattern-intensity registration
    pi_r: int = 5
    pi_delta: float = 0.1
    search_radius: int = 15
    # misalignment correction
    align_radius: int = 10
    align_passes: int = 3
    # profile-model detection
    band_sa: int = 7
    band_la: int = 9
    smooth_lambda: float = 0.005
    n_theta: int = 79
    n_interp: int = 4
    icm_max_sweeps: int = 50
    # mesh construction and deformation
    n_ring_vertices: int = 80
    n_interp_rings: int = 3
    gamma: float = 0.7
    alpha: float = 0.3
    beta: float = 0.3
    mu: float = 0.1
    d_cutoff: float = 3.0
    deform_max_iters: int = 30
    deform_min_move: float = 0.1
    # execution hint only; results must not depend on it
    threads: int = 1

    def validate(self):
        if self.pi_r < 1:
            raise ValidationError("pi_r must be >= 1")
        if self.pi_delta <= 0:
            raise ValidationError("pi_delta must be positive")
        if self.search_radius < 0 or self.align_radius < 0:
            raise ValidationError("search radii must be >= 0")
        if self.align_passes < 1:
            raise ValidationError("align_passes must be >= 1")
        for name in ("band_sa", "band_la"):
            band = getattr(self, name)
            if band < 3 or band % 2 != 1:
                raise ValidationError(f"{name} must be an odd width >= 3, got {band}")
        if self.smooth_lambda < 0:
            raise ValidationError("lambda must be >= 0")
        if self.n_theta < 8:
            raise ValidationError("n_theta must be >= 8")
        if self.n_interp < 1:
            raise ValidationError("n_interp must be >= 1")
        if self.icm_max_sweeps < 1:
            raise ValidationError("icm_max_sweeps must be >= 1")
        if self.n_ring_vertices < 4 or self.n_ring_vertices % 2 != 0:
            raise ValidationError("n_ring_vertices must be an even count >= 4")
        if self.n_interp_rings < 0:
            raise ValidationError("n_interp_rings must be >= 0")
        if not (0.0 < self.gamma <= 1.0):
            raise ValidationError("gamma must be in (0, 1]")
        if min(self.alpha, self.beta, self.mu) < 0:
            raise ValidationError("force weights must be >= 0")
        if self.d_cutoff <= 0:
            raise ValidationError("d_cutoff must be positive")
        if self.deform_max_iters < 0 or self.deform_min_move < 0:
            raise ValidationError("deform limits must be >= 0")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        return self

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("smooth_lambda")
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = _JSON_ALIASES.get(key, key)
            if name not in known:
                raise ValidationError(f"unknown config key: {key!r}")
            kwargs[name] = value
        return cls(**kwargs).validate()

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", encoding="ascii") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_json(cls, path):
        with open(path, "r", encoding="ascii") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"invalid config JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config JSON must be an object")
        return cls.from_dict(data)
