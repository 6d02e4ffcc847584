"""Desk-scale hardware-aware architecture search over inverted-residual
supernetworks: cost accounting, Gumbel-Softmax co-optimization, pruning, and
Pareto extraction of discrete architectures."""

from .search_space import (
    ArchPath,
    CANDIDATES,
    CandidateSpec,
    DecoderSpec,
    MacroArch,
    SuperblockSpec,
    builtin_paths,
    builtin_space,
    load_search_space,
    validate_path,
)
from .cost_model import (
    CostTable,
    RooflineModel,
    arithmetic_intensity,
    build_mac_table,
    expected_cost,
    network_cost,
    synth_latency_table,
)
from .gumbel import TemperatureSchedule, ThetaMatrix, anneal, probs, sample_gumbel_softmax
from .supernet import SearchConfig, SearchResult, Supernet, search
from .pareto import ParetoPoint, pareto_frontier, sample_paths, select
from .toy_task import ToyDataset, generate, miou

__version__ = "0.1.0"
