"""MAC, parameter, traffic and latency accounting for candidate blocks.

Conventions: one MAC is one multiply-accumulate pair; normalization,
activations, elementwise adds, and upsampling cost zero MACs. Convolutions
are bias-free; parameter counts include two normalization parameters
(scale, shift) per normalized channel. Blocks with expansion 1 have no
expansion convolution.

The decoder cost models are approximations of the real decoder heads; their
layer inventories are documented next to the functions that compute them.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .gumbel import ThetaMatrix, probs
from .search_space import (
    CANDIDATES,
    ArchPath,
    CandidateSpec,
    ConvSpec,
    MacroArch,
    SearchSpaceError,
    SuperblockSpec,
    validate_path,
)

__all__ = [
    "CostTable",
    "RooflineModel",
    "CostModelError",
    "block_macs",
    "block_params",
    "block_traffic_elements",
    "network_cost",
    "network_traffic_bytes",
    "arithmetic_intensity",
    "build_mac_table",
    "load_latency_table",
    "dump_latency_table",
    "synth_latency_table",
    "expected_cost",
    "path_table_cost",
    "stage_report",
    "DEFAULT_RESOLUTION",
]

DEFAULT_RESOLUTION = (1024, 2048)


class CostModelError(ValueError):
    """Raised for malformed cost tables or inadmissible block queries."""


@dataclass(frozen=True)
class CostTable:
    """Per-(superblock, candidate) nonnegative costs under one metric."""

    metric: str  # "macs" or "latency_ms"
    costs: np.ndarray  # (num_superblocks, 13), float64
    resolution: tuple[int, int]

    def __post_init__(self):
        if self.metric not in ("macs", "latency_ms"):
            raise CostModelError(f"unknown cost metric {self.metric!r}")
        costs = np.asarray(self.costs, dtype=np.float64)
        if costs.ndim != 2 or costs.shape[1] != len(CANDIDATES):
            raise CostModelError(f"cost matrix must be (superblocks, 13), got {costs.shape}")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise CostModelError("cost entries must be finite and nonnegative")
        object.__setattr__(self, "costs", costs)

    @property
    def num_superblocks(self) -> int:
        return self.costs.shape[0]


@dataclass(frozen=True)
class RooflineModel:
    """Device abstraction for synthetic latencies: compute peak vs memory feed rate."""

    peak_mac_rate: float  # MACs per second
    memory_bandwidth: float  # bytes per second
    bytes_per_element: int = 4

    def __post_init__(self):
        if self.peak_mac_rate <= 0 or self.memory_bandwidth <= 0 or self.bytes_per_element <= 0:
            raise CostModelError("roofline constants must be strictly positive")

    def latency_ms(self, macs: float, traffic_bytes: float) -> float:
        seconds = max(macs / self.peak_mac_rate, traffic_bytes / self.memory_bandwidth)
        return seconds * 1e3


def _check_block_inputs(candidate: CandidateSpec, block: SuperblockSpec, input_dims=None):
    if not block.admissible(candidate):
        raise CostModelError(
            f"candidate {candidate.mnemonic} inadmissible for superblock {block.index}"
        )
    if input_dims is not None:
        h, w = input_dims
        if h % block.stride or w % block.stride:
            raise CostModelError(
                f"input dims {h}x{w} not divisible by stride {block.stride}"
            )


def block_macs(candidate: CandidateSpec, block: SuperblockSpec, input_dims: tuple[int, int]) -> int:
    """MACs of one candidate at one superblock, given the incoming H x W.

    Expansion 1x1 runs at input resolution, the depthwise conv applies the
    stride, and the projection 1x1 runs at output resolution. Grouping
    divides the 1x1 fan-in by g. Skip costs nothing.
    """
    _check_block_inputs(candidate, block, input_dims)
    if candidate.is_skip:
        return 0
    h, w = input_dims
    ho, wo = h // block.stride, w // block.stride
    mid = candidate.expansion * block.c_in
    total = 0
    if candidate.expansion != 1:
        total += h * w * mid * (block.c_in // candidate.groups)
    total += ho * wo * mid * candidate.kernel * candidate.kernel
    total += ho * wo * block.c_out * (mid // candidate.groups)
    return total


def block_params(candidate: CandidateSpec, block: SuperblockSpec) -> int:
    """Weight count plus 2 normalization parameters per normalized channel."""
    _check_block_inputs(candidate, block)
    if candidate.is_skip:
        return 0
    mid = candidate.expansion * block.c_in
    weights = 0
    norm_channels = 0
    if candidate.expansion != 1:
        weights += mid * (block.c_in // candidate.groups)
        norm_channels += mid
    weights += mid * candidate.kernel * candidate.kernel
    norm_channels += mid
    weights += block.c_out * (mid // candidate.groups)
    norm_channels += block.c_out
    return weights + 2 * norm_channels


def block_traffic_elements(
    candidate: CandidateSpec, block: SuperblockSpec, input_dims: tuple[int, int]
) -> int:
    """Memory traffic in elements: per conv stage, input + output + weights.

    Skip moves its input once. Batch size 1 throughout.
    """
    _check_block_inputs(candidate, block, input_dims)
    h, w = input_dims
    in_el = h * w * block.c_in
    if candidate.is_skip:
        return in_el
    ho, wo = h // block.stride, w // block.stride
    mid = candidate.expansion * block.c_in
    mid_in = h * w * mid
    mid_out = ho * wo * mid
    out_el = ho * wo * block.c_out
    k2 = candidate.kernel * candidate.kernel
    traffic = 0
    if candidate.expansion != 1:
        traffic += in_el + mid_in + mid * (block.c_in // candidate.groups)
    traffic += mid_in + mid_out + mid * k2
    traffic += mid_out + out_el + block.c_out * (mid // candidate.groups)
    return traffic


def _conv_macs(spec: ConvSpec, input_dims: tuple[int, int]) -> int:
    h, w = input_dims
    ho, wo = h // spec.stride, w // spec.stride
    return ho * wo * spec.c_out * spec.c_in * spec.kernel * spec.kernel


def _conv_params(spec: ConvSpec, norm: bool = True) -> int:
    p = spec.c_out * spec.c_in * spec.kernel * spec.kernel
    if norm:
        p += 2 * spec.c_out
    return p


def _conv_traffic(spec: ConvSpec, input_dims: tuple[int, int]) -> int:
    h, w = input_dims
    ho, wo = h // spec.stride, w // spec.stride
    return (
        h * w * spec.c_in
        + ho * wo * spec.c_out
        + spec.c_out * spec.c_in * spec.kernel * spec.kernel
    )


def _dims_at(input_dims: tuple[int, int], output_stride: int) -> tuple[int, int]:
    h, w = input_dims
    if h % output_stride or w % output_stride:
        raise CostModelError(
            f"resolution {h}x{w} not divisible by output stride {output_stride}"
        )
    return h // output_stride, w // output_stride


def superblock_input_dims(macro: MacroArch, index: int, input_dims: tuple[int, int]):
    """Spatial dims of the feature map entering superblock ``index``."""
    sb = macro.superblocks[index]
    return _dims_at(input_dims, sb.output_stride // sb.stride)


# ---------------------------------------------------------------------------
# Decoder cost models. Documented approximations:
#
# lr_aspp: a 3x3 context conv (final encoder channels -> internal) with norm
# at the encoder output resolution; a gating branch (global average pool,
# 1x1 conv to internal channels, sigmoid) counted at the pooled 1x1
# resolution; elementwise gating and upsampling free; then two num_classes
# 1x1 projections at the tap resolution, one from the gated context branch
# and one from the low-level tap features.
#
# depthwise_aspp: five branches at the encoder output resolution (1x1 conv;
# three 3x3 depthwise-separable atrous convs; pooled 1x1 conv), each to
# internal channels; a 1x1 merge conv from the concatenation; a 1x1
# projection of the tap features to 48 channels; one 3x3 depthwise-separable
# refinement conv (internal+48 -> internal) at the tap resolution; a final
# num_classes 1x1 projection at the tap resolution.
# ---------------------------------------------------------------------------


def _decoder_layers(macro: MacroArch) -> list[tuple[ConvSpec, int, bool]]:
    """Decoder convs as (spec, output_stride_of_input, has_norm) triples.

    Depthwise stages are modeled as ConvSpec with c_in = channel multiplier 1
    handled explicitly below, so this helper returns plain dense 1x1/3x3
    stages plus (channels, kernel) depthwise entries encoded with c_in == 0.
    """
    dec = macro.decoder
    c_final = macro.final_channels
    c_tap = macro.tap_superblock().c_out
    os_final = macro.final_output_stride
    os_tap = macro.tap_superblock().output_stride
    ic = dec.internal_channels
    k = dec.num_classes
    layers: list[tuple[ConvSpec, int, bool]] = []
    if dec.kind == "lr_aspp":
        layers.append((ConvSpec(c_final, ic, 3), os_final, True))  # context conv
        layers.append((ConvSpec(c_final, ic, 1), 0, False))  # pooled gate conv
        layers.append((ConvSpec(ic, k, 1), os_tap, False))  # context classifier
        layers.append((ConvSpec(c_tap, k, 1), os_tap, False))  # low-level classifier
        return layers
    # depthwise_aspp
    layers.append((ConvSpec(c_final, ic, 1), os_final, True))  # branch 1
    for _ in range(3):  # branches 2-4: depthwise 3x3 + pointwise
        layers.append((ConvSpec(0, c_final, 3), os_final, True))
        layers.append((ConvSpec(c_final, ic, 1), os_final, True))
    layers.append((ConvSpec(c_final, ic, 1), 0, True))  # pooled branch 5
    layers.append((ConvSpec(5 * ic, ic, 1), os_final, True))  # merge
    layers.append((ConvSpec(c_tap, 48, 1), os_tap, True))  # low-level projection
    layers.append((ConvSpec(0, ic + 48, 3), os_tap, True))  # refine depthwise
    layers.append((ConvSpec(ic + 48, ic, 1), os_tap, True))  # refine pointwise
    layers.append((ConvSpec(ic, k, 1), os_tap, False))  # classifier
    return layers


def _decoder_totals(macro: MacroArch, input_dims: tuple[int, int]):
    macs = 0
    params = 0
    traffic = 0
    for spec, os_in, has_norm in _decoder_layers(macro):
        dims = (1, 1) if os_in == 0 else _dims_at(input_dims, os_in)
        if spec.c_in == 0:  # depthwise stage on c_out channels
            h, w = dims
            macs += h * w * spec.c_out * spec.kernel * spec.kernel
            params += spec.c_out * spec.kernel * spec.kernel
            traffic += 2 * h * w * spec.c_out + spec.c_out * spec.kernel * spec.kernel
        else:
            macs += _conv_macs(spec, dims)
            params += _conv_params(spec, norm=False)
            traffic += _conv_traffic(spec, dims)
        if has_norm:
            params += 2 * spec.c_out
    return macs, params, traffic


def decoder_macs(macro: MacroArch, input_dims: tuple[int, int]) -> int:
    return _decoder_totals(macro, input_dims)[0]


def decoder_params(macro: MacroArch) -> int:
    return _decoder_totals(macro, DEFAULT_RESOLUTION)[1]


def stem_macs(macro: MacroArch, input_dims: tuple[int, int]) -> int:
    return _conv_macs(macro.stem, input_dims)


def stem_params(macro: MacroArch) -> int:
    return _conv_params(macro.stem, norm=True)


def network_cost(
    path: ArchPath,
    macro: MacroArch,
    input_dims: tuple[int, int] = DEFAULT_RESOLUTION,
    metric: str = "macs",
) -> int:
    """Whole-network MACs or parameters along a discrete path.

    Includes the stem, the selected block per superblock, any fixed trailing
    conv, and the decoder model. ``input_dims`` is ignored for parameters.
    """
    if metric not in ("macs", "params"):
        raise CostModelError(f"unknown metric {metric!r} (use 'macs' or 'params')")
    check = validate_path(path, macro)
    if not check.valid:
        raise CostModelError(f"invalid path: {check.reason}")
    if metric == "params":
        total = stem_params(macro)
        for sb, j in zip(macro.superblocks, path.choices):
            total += block_params(CANDIDATES[j], sb)
        if macro.trailing_conv is not None:
            total += _conv_params(macro.trailing_conv, norm=True)
        total += decoder_params(macro)
        return total
    total = stem_macs(macro, input_dims)
    for sb, j in zip(macro.superblocks, path.choices):
        dims = superblock_input_dims(macro, sb.index, input_dims)
        total += block_macs(CANDIDATES[j], sb, dims)
    if macro.trailing_conv is not None:
        total += _conv_macs(macro.trailing_conv, _dims_at(input_dims, macro.final_output_stride))
    total += decoder_macs(macro, input_dims)
    return total


def network_traffic_bytes(
    path: ArchPath,
    macro: MacroArch,
    input_dims: tuple[int, int] = DEFAULT_RESOLUTION,
    bytes_per_element: int = 4,
) -> int:
    """Total memory traffic along a path under the per-stage traffic model."""
    check = validate_path(path, macro)
    if not check.valid:
        raise CostModelError(f"invalid path: {check.reason}")
    traffic = _conv_traffic(macro.stem, input_dims)
    for sb, j in zip(macro.superblocks, path.choices):
        dims = superblock_input_dims(macro, sb.index, input_dims)
        traffic += block_traffic_elements(CANDIDATES[j], sb, dims)
    if macro.trailing_conv is not None:
        traffic += _conv_traffic(
            macro.trailing_conv, _dims_at(input_dims, macro.final_output_stride)
        )
    traffic += _decoder_totals(macro, input_dims)[2]
    return traffic * bytes_per_element


def arithmetic_intensity(
    path: ArchPath,
    macro: MacroArch,
    input_dims: tuple[int, int] = DEFAULT_RESOLUTION,
    bytes_per_element: int = 4,
) -> float:
    """MACs per byte of memory traffic for the whole network."""
    macs = network_cost(path, macro, input_dims, metric="macs")
    traffic = network_traffic_bytes(path, macro, input_dims, bytes_per_element)
    return macs / traffic


def build_mac_table(
    macro: MacroArch, input_dims: tuple[int, int] = DEFAULT_RESOLUTION
) -> CostTable:
    """MAC lookup table: entry (i, j) is candidate j's MACs at superblock i."""
    costs = np.zeros((macro.num_superblocks, len(CANDIDATES)), dtype=np.float64)
    for sb in macro.superblocks:
        dims = superblock_input_dims(macro, sb.index, input_dims)
        for j, cand in enumerate(CANDIDATES):
            if not sb.admissible(cand):
                continue  # inadmissible entries stay 0; they are masked out upstream
            costs[sb.index, j] = block_macs(cand, sb, dims)
    return CostTable(metric="macs", costs=costs, resolution=tuple(input_dims))


def synth_latency_table(
    macro: MacroArch,
    model: RooflineModel,
    input_dims: tuple[int, int] = DEFAULT_RESOLUTION,
) -> CostTable:
    """Latency table from the roofline model instead of device measurements.

    Each block's latency is max(compute time, memory time) over its total
    MACs and traffic; a skip costs one pass of its input through memory.
    """
    costs = np.zeros((macro.num_superblocks, len(CANDIDATES)), dtype=np.float64)
    bpe = model.bytes_per_element
    for sb in macro.superblocks:
        dims = superblock_input_dims(macro, sb.index, input_dims)
        for j, cand in enumerate(CANDIDATES):
            if not sb.admissible(cand):
                continue
            macs = block_macs(cand, sb, dims)
            traffic = block_traffic_elements(cand, sb, dims) * bpe
            costs[sb.index, j] = model.latency_ms(macs, traffic)
    return CostTable(metric="latency_ms", costs=costs, resolution=tuple(input_dims))


def load_latency_table(
    source, macro: MacroArch, resolution: tuple[int, int] = DEFAULT_RESOLUTION
) -> CostTable:
    """Read a measured latency table from CSV with header superblock,candidate,latency_ms.

    Every admissible (superblock, candidate) pair must appear exactly once.
    """
    if isinstance(source, (str, bytes)):
        text = source.decode() if isinstance(source, bytes) else source
        fh = io.StringIO(text)
    else:
        fh = source
    reader = csv.DictReader(fh)
    required = {"superblock", "candidate", "latency_ms"}
    if reader.fieldnames is None or not required.issubset(reader.fieldnames):
        raise CostModelError(
            f"latency CSV must have columns {sorted(required)}, got {reader.fieldnames}"
        )
    n_sb = macro.num_superblocks
    n_c = len(CANDIDATES)
    costs = np.full((n_sb, n_c), np.nan)
    for lineno, row in enumerate(reader, start=2):
        try:
            i = int(row["superblock"])
            j = int(row["candidate"])
            val = float(row["latency_ms"])
        except (TypeError, ValueError) as exc:
            raise CostModelError(f"line {lineno}: malformed row {row}") from exc
        if not 0 <= i < n_sb or not 0 <= j < n_c:
            raise CostModelError(f"line {lineno}: pair ({i}, {j}) out of range")
        if val < 0:
            raise CostModelError(f"line {lineno}: negative latency for pair ({i}, {j})")
        if not np.isnan(costs[i, j]):
            raise CostModelError(f"duplicate entry for pair ({i}, {j})")
        costs[i, j] = val
    missing = np.argwhere(np.isnan(costs))
    for i, j in missing:
        if macro.superblocks[i].admissible(CANDIDATES[j]):
            raise CostModelError(f"missing entry for pair ({i}, {j})")
        costs[i, j] = 0.0
    return CostTable(metric="latency_ms", costs=costs, resolution=tuple(resolution))


def dump_latency_table(table: CostTable, macro: MacroArch) -> str:
    """Serialize a latency table to the CSV wire format."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["superblock", "candidate", "latency_ms"])
    for sb in macro.superblocks:
        for j, cand in enumerate(CANDIDATES):
            if not sb.admissible(cand):
                continue
            writer.writerow([sb.index, j, repr(float(table.costs[sb.index, j]))])
    return buf.getvalue()


def expected_cost(theta: ThetaMatrix, table: CostTable) -> float:
    """Expected network resource cost under the architecture distribution.

    Sum over superblocks of the probability-weighted candidate costs, with
    probabilities from the masked softmax over each theta row.
    """
    if theta.logits.shape != table.costs.shape:
        raise CostModelError(
            f"theta shape {theta.logits.shape} != cost table shape {table.costs.shape}"
        )
    total = 0.0
    for i in range(theta.num_superblocks):
        p = probs(theta.logits[i], theta.active_mask[i])
        total += float((p * table.costs[i]).sum())
    return total


def path_table_cost(table: CostTable, path: ArchPath) -> float:
    """Sum of table entries along a discrete path."""
    if len(path) != table.num_superblocks:
        raise CostModelError(
            f"path length {len(path)} != table superblocks {table.num_superblocks}"
        )
    return float(sum(table.costs[i, j] for i, j in enumerate(path.choices)))


def stage_report(
    path: ArchPath, macro: MacroArch, input_dims: tuple[int, int] = DEFAULT_RESOLUTION
) -> list[dict]:
    """Per-stage cost rows for reporting (stem, blocks, trailing conv, decoder)."""
    check = validate_path(path, macro)
    if not check.valid:
        raise CostModelError(f"invalid path: {check.reason}")
    rows = [
        {
            "stage": "stem",
            "op": f"conv{macro.stem.kernel}x{macro.stem.kernel}_s{macro.stem.stride}",
            "macs": stem_macs(macro, input_dims),
            "params": stem_params(macro),
        }
    ]
    for sb, j in zip(macro.superblocks, path.choices):
        cand = CANDIDATES[j]
        dims = superblock_input_dims(macro, sb.index, input_dims)
        rows.append(
            {
                "stage": f"superblock{sb.index}",
                "op": cand.mnemonic,
                "macs": block_macs(cand, sb, dims),
                "params": block_params(cand, sb),
            }
        )
    if macro.trailing_conv is not None:
        tc = macro.trailing_conv
        rows.append(
            {
                "stage": "trailing",
                "op": f"conv{tc.kernel}x{tc.kernel}",
                "macs": _conv_macs(tc, _dims_at(input_dims, macro.final_output_stride)),
                "params": _conv_params(tc, norm=True),
            }
        )
    dm, dp, _ = _decoder_totals(macro, input_dims)
    rows.append({"stage": "decoder", "op": macro.decoder.kind, "macs": dm, "params": dp})
    return rows
