"""End-to-end surrogate construction on in-memory inputs."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .assign import AssignmentConfig, AssignmentReport, build_surrogate, check_constraints
from .candidates import CandidateEdge, compute_deficits, generate_candidates
from .dist import DEFAULT_BIN_WIDTH, ConditionalWeightDistribution, build_conditional
from .ingest import PopulationTable, PreprocessReport, strip_non_geographic
from .network import Level, ODNetwork, PartitionHierarchy, aggregate, edge_intersection, out_strengths
from .seeding import derive_seed
from .validate import ValidationReport, surrogate_report

log = logging.getLogger(__name__)


@dataclass
class Inputs:
    hierarchy: PartitionHierarchy
    R: ODNetwork
    H: ODNetwork
    B: ODNetwork
    Gamma: ODNetwork
    n_x: PopulationTable
    n_y: PopulationTable
    n_x_prev: PopulationTable | None = None

    @classmethod
    def from_bundle(cls, bundle) -> Inputs:
        return cls(bundle.hierarchy, bundle.R, bundle.H, bundle.B, bundle.Gamma, bundle.n_x, bundle.n_y, bundle.n_x_prev)

    def previous_populations(self) -> PopulationTable:
        """Origin populations for the earlier census; its out-strengths when not supplied."""
        if self.n_x_prev is not None:
            return self.n_x_prev
        return PopulationTable(out_strengths(self.H), Level.FINE_ORIGIN)


@dataclass
class RunResult:
    surrogate: ODNetwork
    candidates: list[CandidateEdge]
    distribution: ConditionalWeightDistribution
    deficits: dict[str, int]
    e_ab: frozenset
    assignment: AssignmentReport
    violations: list[str]
    report: ValidationReport
    preprocess: dict[str, PreprocessReport] = field(default_factory=dict)
    inputs: Inputs | None = None


def preprocess(inputs: Inputs, blocklist) -> tuple[Inputs, dict[str, PreprocessReport]]:
    reports = {}
    stripped = {}
    for name in ("R", "H", "B", "Gamma"):
        stripped[name], reports[name] = strip_non_geographic(getattr(inputs, name), blocklist)
    return (
        Inputs(inputs.hierarchy, stripped["R"], stripped["H"], stripped["B"], stripped["Gamma"], inputs.n_x, inputs.n_y, inputs.n_x_prev),
        reports,
    )


def run(
    inputs: Inputs,
    *,
    seed: int,
    bin_width: int = DEFAULT_BIN_WIDTH,
    blocklist=(),
    assignment: AssignmentConfig | None = None,
    distribution: ConditionalWeightDistribution | None = None,
    candidates: list[CandidateEdge] | None = None,
    backend: str | None = None,
    progress=None,
    clustering_mode: str = "max",
) -> RunResult:
    """Distribution -> candidates -> assignment -> audit -> validation.

    ``distribution`` and ``candidates`` may be supplied to resume from
    earlier stages; otherwise they are built from ``inputs``. Assignment
    uses ``assignment.seed`` when given, else a stream derived from ``seed``.
    """
    inputs, pre = preprocess(inputs, blocklist)
    h = inputs.hierarchy
    if distribution is None:
        distribution = build_conditional(inputs.H, inputs.previous_populations(), bin_width)
    deficits = compute_deficits(inputs.R, inputs.n_x)
    if candidates is None:
        candidates = generate_candidates(deficits, distribution, inputs.n_x, derive_seed(seed, "candidates"))
    log.info("%d candidates carrying %d commuters", len(candidates), sum(c.weight for c in candidates))
    e_ab = edge_intersection(inputs.B, aggregate(inputs.R, h))
    cfg = assignment or AssignmentConfig(seed=derive_seed(seed, "assignment"))
    S, rep = build_surrogate(
        inputs.R, candidates, inputs.B, inputs.Gamma, e_ab, inputs.n_y, h, cfg, backend=backend, progress=progress
    )
    log.info("assignment finished after %d passes (%s); %d commuters unassigned", rep.passes, rep.termination, rep.unassigned_commuters)
    violations = check_constraints(inputs.R, S, inputs.B, inputs.Gamma, e_ab, inputs.n_x, inputs.n_y, h)
    report = surrogate_report(inputs.R, S, inputs.B, h, clustering_mode=clustering_mode, backend=backend)
    return RunResult(S, candidates, distribution, deficits, e_ab, rep, violations, report, pre, inputs)
