"""Identification of Markovian open quantum systems from observable time traces.

Typical use::

    from openqid import builtin_model, ModelEvaluator, simulate_traces, identify, EstimationConfig

    model = builtin_model("energy_transfer")
    traces = simulate_traces(ModelEvaluator(model).system(model.theta_nominal), 0.01, 6000)
    report = identify(model, traces, EstimationConfig(mode=2))
"""

__version__ = "0.1.0"

from .algebra import OperatorBasis, StructureTable, expand_operator, pauli_basis, structure_constants
from .dynamics import TraceSet, add_noise, reference_master_equation, simulate_traces
from .era import OrderPolicy, Realization, build_hankel, era_from_traces, era_realize, to_continuous
from .errors import OpenQIDError, ValidationError
from .estimate import (
    EstimateReport,
    EstimationConfig,
    ModelEvaluator,
    identify,
    noise_sweep,
    relative_errors,
    residual,
)
from .generator import AffineLTI, ParamModel, accessible_set, assemble_generator, compile_model, restrict
from .models import builtin_model, model_ids
from .xfer import RationalTF, lti_tf, model_tf_oracle, normalize_tf, transfer_coeffs

__all__ = [
    "AffineLTI",
    "EstimateReport",
    "EstimationConfig",
    "ModelEvaluator",
    "OpenQIDError",
    "OperatorBasis",
    "OrderPolicy",
    "ParamModel",
    "RationalTF",
    "Realization",
    "StructureTable",
    "TraceSet",
    "ValidationError",
    "accessible_set",
    "add_noise",
    "assemble_generator",
    "build_hankel",
    "builtin_model",
    "compile_model",
    "era_from_traces",
    "era_realize",
    "expand_operator",
    "identify",
    "lti_tf",
    "model_ids",
    "model_tf_oracle",
    "noise_sweep",
    "normalize_tf",
    "pauli_basis",
    "reference_master_equation",
    "relative_errors",
    "residual",
    "restrict",
    "simulate_traces",
    "structure_constants",
    "to_continuous",
    "transfer_coeffs",
]
