# =============================================================================
# EVALUATION MODULE - Pipeline Variants
# File: modules/evaluation/variants.py
# =============================================================================

from dataclasses import asdict, dataclass

from ..core.errors import ConfigError
from ..cornea.estimator import CORNEA_MODES

DETECTION_SOURCES = ("oracle", "noisy-oracle", "raster-classical")
MAPPER_KINDS = ("polynomial", "network")


@dataclass(frozen=True)
class VariantSpec:
    name: str
    detection_source: str
    cornea_mode: str
    mapper: str

    def __post_init__(self):
        if self.detection_source not in DETECTION_SOURCES:
            raise ConfigError(f"Unknown detection source {self.detection_source!r}")
        if self.cornea_mode not in CORNEA_MODES:
            raise ConfigError(f"Unknown cornea mode {self.cornea_mode!r}")
        if self.mapper not in MAPPER_KINDS:
            raise ConfigError(f"Unknown mapper {self.mapper!r}")

    @property
    def refinement(self):
        return self.cornea_mode == "refine-lift"

    def to_dict(self):
        return asdict(self)


VARIANTS = {
    spec.name: spec for spec in (
        VariantSpec("classical", "raster-classical", "svd-lift", "polynomial"),
        VariantSpec("classical-net", "raster-classical", "svd-lift", "network"),
        VariantSpec("raw-net", "noisy-oracle", "raw-lift", "network"),
        VariantSpec("opt-net", "noisy-oracle", "refine-lift", "network"),
        VariantSpec("svd-net", "noisy-oracle", "svd-lift", "network"),
        VariantSpec("oracle-poly", "oracle", "svd-lift", "polynomial"),
    )
}


def get_variant(name) -> VariantSpec:
    if name not in VARIANTS:
        raise ConfigError(f"Unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    return VARIANTS[name]
