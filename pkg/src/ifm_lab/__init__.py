"""Single-photon linear-optics simulation of interaction-free measurements.

Core layers: ``optics`` (circuits and unitaries), ``mesh`` (rectangular
interferometer compilation), ``schemes`` (measurement protocols and closed
forms), ``estimation`` (sampling and error mitigation), ``robustness`` and
``optimize`` (parameter studies), ``cli`` (experiment harness).
"""

from .optics import (
    BeamSplitter,
    CircuitSpec,
    PhaseShifter,
    Permutation,
    PhotonState,
    Reflectivity,
    UnitaryMatrix,
    bs_unitary,
    compose,
    single_photon_distribution,
    swap_permutation,
)
from .mesh import MeshProgram, decompose, mesh_to_circuit, perturb_mesh, reconstruct
from .schemes import (
    CascadeScheme,
    EVScheme,
    MultimodeScheme,
    OutcomeDistribution,
    TreeScheme,
    build_cascade,
    build_ev,
    build_mismatched_ev,
    build_multimode,
    build_tree,
    cascade_distribution,
    chain_multiset,
    classify,
    detector_classes,
    eta_cascade,
    eta_cascade_uniform,
    eta_ev,
    eta_ev_t,
    eta_mismatch,
    eta_multimode,
    eta_zeno,
    scheme_circuit,
    tree_chains,
    zeno_absorption,
)
from .estimation import (
    BaselineComparison,
    EfficiencyEstimate,
    ShotRecord,
    baseline_compare,
    estimate_eta,
    mitigate,
    randomized_phase_ensemble,
    run_mitigated,
    sample_counts,
)
from .robustness import (
    RobustnessConfig,
    build_chain,
    robustness_histogram,
    summarize_std,
    target_reflectivity,
)
from .optimize import (
    OptimizationResult,
    PrefixReport,
    expected_trials,
    mean_trials,
    optimize_reflectivities,
    verify_prefix_property,
)
from .seeds import child_rng, child_seed

__version__ = "0.1.0"

__all__ = [
    "BaselineComparison",
    "BeamSplitter",
    "CascadeScheme",
    "CircuitSpec",
    "EVScheme",
    "EfficiencyEstimate",
    "MeshProgram",
    "MultimodeScheme",
    "OptimizationResult",
    "OutcomeDistribution",
    "Permutation",
    "PhaseShifter",
    "PhotonState",
    "PrefixReport",
    "Reflectivity",
    "RobustnessConfig",
    "ShotRecord",
    "TreeScheme",
    "UnitaryMatrix",
    "baseline_compare",
    "bs_unitary",
    "build_cascade",
    "build_chain",
    "build_ev",
    "build_mismatched_ev",
    "build_multimode",
    "build_tree",
    "cascade_distribution",
    "chain_multiset",
    "child_rng",
    "child_seed",
    "classify",
    "compose",
    "decompose",
    "detector_classes",
    "estimate_eta",
    "eta_cascade",
    "eta_cascade_uniform",
    "eta_ev",
    "eta_ev_t",
    "eta_mismatch",
    "eta_multimode",
    "eta_zeno",
    "expected_trials",
    "mean_trials",
    "mesh_to_circuit",
    "mitigate",
    "optimize_reflectivities",
    "perturb_mesh",
    "randomized_phase_ensemble",
    "reconstruct",
    "run_mitigated",
    "sample_counts",
    "scheme_circuit",
    "single_photon_distribution",
    "summarize_std",
    "swap_permutation",
    "target_reflectivity",
    "tree_chains",
    "verify_prefix_property",
    "zeno_absorption",
]
