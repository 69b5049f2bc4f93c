"""
GBC mass - curvature tensors, flux integrals and identity checks

Tensor algebra and curvature live in tensor_core and the two geometry
modules; mass_integrals turns them into fluxes, bulk integrals and the
main identity; models holds the model zoo.
"""

from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    GBCMassError,
    ImmersionError,
    IntegrabilityError,
    ModelError,
    SpecError,
)
from .events import EventBus, EventRecorder
from .extrinsic_geometry import ImmersionModel, extrinsic_at
from .intrinsic_geometry import MetricModel, ae_decay_check, curvature_at
from .mass_integrals import (
    IdentityConfig,
    MassEstimate,
    corollary_inequality,
    estimate_mass,
    extrapolate,
    field_robustness,
    verify_main_identity,
)
from .models import ModelSpec, make_model, zoo
from .reports import IdentityReport

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DomainError",
    "EventBus",
    "EventRecorder",
    "GBCMassError",
    "IdentityConfig",
    "IdentityReport",
    "ImmersionError",
    "ImmersionModel",
    "IntegrabilityError",
    "MassEstimate",
    "MetricModel",
    "ModelError",
    "ModelSpec",
    "SpecError",
    "ae_decay_check",
    "corollary_inequality",
    "curvature_at",
    "estimate_mass",
    "extrapolate",
    "extrinsic_at",
    "field_robustness",
    "make_model",
    "verify_main_identity",
    "zoo",
]
