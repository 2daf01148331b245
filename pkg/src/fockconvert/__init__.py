"""Adaptive (feedforward) photon subtraction for Fock-state conversion |m> -> |n>."""

from .fock import (
    BeamSplitter,
    ClickPair,
    DetectorModel,
    DomainError,
    IdealPNR,
    InefficientPNR,
    LossChannel,
    PhotonNumberMixture,
    apply_loss,
    detect,
    splitting_distribution,
)
from .planner import (
    PmaxTable,
    Policy,
    PolicyNode,
    build_policy,
    evaluate_policy,
    optimal_first_stage,
    pmax_table,
    static_policy,
    switched_policy,
)
from .tradeoff import (
    InfeasibleTarget,
    TradeoffPoint,
    elementary_point,
    feedforward_point,
    optimize_feedforward,
    tradeoff_curve,
)
from .montecarlo import Estimate, TrajectoryRecord, estimate_success, simulate_trajectory

__version__ = "0.1.0"
