"""otrlab: a desk-scale simulation lab for optimistic TEE-rollup inference."""

__version__ = "0.1.0"

from .attest import (  # noqa: E402
    CommitmentTuple,
    EnclaveIdentity,
    ForgeryNotPermitted,
    QuoteStatus,
    RootOfTrust,
    Vendor,
    generate_quote,
    measure_enclave,
    verify_quote,
)
from .contract import (  # noqa: E402
    ModelRegistry,
    PoEAStatus,
    Verifier,
    choose_rho,
    spot_check,
    verify_poea,
    vrf_eval,
    vrf_verify,
)
from .econ import EconParams, Strategy, expected_cheat_profit, p_catch, will_cheat  # noqa: E402
from .model_exec import ModelSpec, QualityModel, run_inference, table4_quality  # noqa: E402
from .simnet import (  # noqa: E402
    CostParams,
    LatencyParams,
    amortized_cost,
    amortized_latency,
    finality_latency,
    run_scenario,
)

__all__ = [
    "CommitmentTuple", "EnclaveIdentity", "ForgeryNotPermitted", "QuoteStatus", "RootOfTrust",
    "Vendor", "generate_quote", "measure_enclave", "verify_quote",
    "ModelRegistry", "PoEAStatus", "Verifier", "choose_rho", "spot_check", "verify_poea",
    "vrf_eval", "vrf_verify",
    "EconParams", "Strategy", "expected_cheat_profit", "p_catch", "will_cheat",
    "ModelSpec", "QualityModel", "run_inference", "table4_quality",
    "CostParams", "LatencyParams", "amortized_cost", "amortized_latency", "finality_latency",
    "run_scenario",
]
