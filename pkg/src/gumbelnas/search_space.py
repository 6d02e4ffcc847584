"""Candidate blocks, macro architectures, and architecture paths.

The search space is a fixed macro skeleton (stem, per-superblock channel
counts and strides, decoder) in which every superblock chooses one of 13
candidates: 12 inverted-residual configurations plus a no-op skip. The
candidate list and the three built-in macro plans (small / large / xlarge)
are embedded as data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

__all__ = [
    "CandidateSpec",
    "SuperblockSpec",
    "DecoderSpec",
    "ConvSpec",
    "MacroArch",
    "ArchPath",
    "PathCheck",
    "SearchSpaceError",
    "CANDIDATES",
    "SKIP_INDEX",
    "candidate_index",
    "builtin_space",
    "builtin_paths",
    "validate_path",
    "output_shape",
    "load_search_space",
    "dump_search_space",
    "load_path",
    "dump_path",
]


class SearchSpaceError(ValueError):
    """Raised for malformed spaces, paths, or candidate specs."""


@dataclass(frozen=True)
class CandidateSpec:
    """One block choice: inverted residual (kernel/dilation/expansion/groups) or skip.

    Skip candidates zero out all convolution fields.
    """

    kernel: int
    dilation: int
    expansion: int
    groups: int
    is_skip: bool = False

    def __post_init__(self):
        if self.is_skip:
            if (self.kernel, self.dilation, self.expansion, self.groups) != (0, 0, 0, 0):
                raise SearchSpaceError("skip candidate must have zeroed conv fields")
            return
        if self.kernel not in (3, 5):
            raise SearchSpaceError(f"kernel must be 3 or 5, got {self.kernel}")
        if self.dilation not in (1, 2):
            raise SearchSpaceError(f"dilation must be 1 or 2, got {self.dilation}")
        if self.expansion not in (1, 3, 6):
            raise SearchSpaceError(f"expansion must be 1, 3 or 6, got {self.expansion}")
        if self.groups not in (1, 2):
            raise SearchSpaceError(f"groups must be 1 or 2, got {self.groups}")
        if self.kernel == 5 and self.dilation == 2:
            raise SearchSpaceError("5x5 kernels with dilation 2 are not in the space")

    @property
    def mnemonic(self) -> str:
        if self.is_skip:
            return "skip"
        return f"k{self.kernel}_d{self.dilation}_e{self.expansion}_g{self.groups}"

    @classmethod
    def skip(cls) -> "CandidateSpec":
        return cls(0, 0, 0, 0, is_skip=True)

    @classmethod
    def from_mnemonic(cls, name: str) -> "CandidateSpec":
        if name == "skip":
            return cls.skip()
        try:
            k, d, e, g = (int(part[1:]) for part in name.split("_"))
        except Exception as exc:
            raise SearchSpaceError(f"bad candidate mnemonic {name!r}") from exc
        return cls(kernel=k, dilation=d, expansion=e, groups=g)


def _canonical_candidates() -> tuple[CandidateSpec, ...]:
    # 12 conv candidates in fixed row order, skip last. This ordering is what
    # makes theta columns and cost-table columns comparable across runs.
    rows = [
        (3, 1, 1, 2),
        (3, 1, 1, 1),
        (3, 1, 3, 1),
        (3, 1, 6, 1),
        (3, 2, 1, 2),
        (3, 2, 1, 1),
        (3, 2, 3, 1),
        (3, 2, 6, 1),
        (5, 1, 1, 2),
        (5, 1, 1, 1),
        (5, 1, 3, 1),
        (5, 1, 6, 1),
    ]
    cands = [CandidateSpec(*row) for row in rows]
    cands.append(CandidateSpec.skip())
    return tuple(cands)


CANDIDATES: tuple[CandidateSpec, ...] = _canonical_candidates()
SKIP_INDEX: int = len(CANDIDATES) - 1
_MNEMONIC_TO_INDEX = {c.mnemonic: i for i, c in enumerate(CANDIDATES)}


def candidate_index(mnemonic: str) -> int:
    """Index of a candidate mnemonic in the canonical 13-entry list."""
    try:
        return _MNEMONIC_TO_INDEX[mnemonic]
    except KeyError:
        raise SearchSpaceError(f"unknown candidate mnemonic {mnemonic!r}") from None


@dataclass(frozen=True)
class SuperblockSpec:
    """Channel/stride constraints for one searched position."""

    index: int
    c_in: int
    c_out: int
    stride: int
    output_stride: int
    candidates: tuple[CandidateSpec, ...] = field(default=CANDIDATES)

    def __post_init__(self):
        if self.stride not in (1, 2):
            raise SearchSpaceError(f"superblock {self.index}: stride must be 1 or 2")
        if self.c_in < 1 or self.c_out < 1:
            raise SearchSpaceError(f"superblock {self.index}: bad channel counts")
        os = self.output_stride
        if os < 1 or os & (os - 1):
            raise SearchSpaceError(f"superblock {self.index}: output_stride not a power of 2")

    @property
    def skip_admissible(self) -> bool:
        # Identity pass-through, realized as zero channel padding when the
        # block widens; never admissible on downsampling blocks.
        return self.stride == 1 and self.c_out >= self.c_in

    def admissible(self, candidate: CandidateSpec) -> bool:
        return self.skip_admissible if candidate.is_skip else True


@dataclass(frozen=True)
class DecoderSpec:
    """Decoder family attached to the encoder output."""

    kind: str  # "lr_aspp" or "depthwise_aspp"
    internal_channels: int
    num_classes: int

    def __post_init__(self):
        if self.kind not in ("lr_aspp", "depthwise_aspp"):
            raise SearchSpaceError(f"unknown decoder kind {self.kind!r}")
        if self.internal_channels < 1 or self.num_classes < 2:
            raise SearchSpaceError("decoder channels/classes out of range")


@dataclass(frozen=True)
class ConvSpec:
    """A fixed (non-searched) convolution, e.g. the stem or a trailing 1x1."""

    c_in: int
    c_out: int
    kernel: int
    stride: int = 1


@dataclass(frozen=True)
class MacroArch:
    """Stem + ordered superblocks + decoder; immutable once constructed."""

    name: str
    stem: ConvSpec
    superblocks: tuple[SuperblockSpec, ...]
    decoder: DecoderSpec
    low_level_tap: int
    trailing_conv: ConvSpec | None = None

    def __post_init__(self):
        self.validate()

    @property
    def num_superblocks(self) -> int:
        return len(self.superblocks)

    @property
    def final_channels(self) -> int:
        if self.trailing_conv is not None:
            return self.trailing_conv.c_out
        return self.superblocks[-1].c_out

    @property
    def final_output_stride(self) -> int:
        return self.superblocks[-1].output_stride

    def tap_superblock(self) -> SuperblockSpec:
        return self.superblocks[self.low_level_tap]

    def validate(self) -> None:
        if not self.superblocks:
            raise SearchSpaceError("macro architecture has no superblocks")
        prev_c = self.stem.c_out
        prev_os = self.stem.stride
        for i, sb in enumerate(self.superblocks):
            if sb.index != i:
                raise SearchSpaceError(f"superblock {i}: index field mismatch ({sb.index})")
            if sb.c_in != prev_c:
                raise SearchSpaceError(
                    f"superblock {i}: channel chain broken "
                    f"(c_in={sb.c_in}, previous c_out={prev_c})"
                )
            expected_os = prev_os * sb.stride
            if sb.output_stride != expected_os:
                raise SearchSpaceError(
                    f"superblock {i}: output_stride {sb.output_stride} inconsistent "
                    f"with stride chain (expected {expected_os})"
                )
            for cand in sb.candidates:
                if cand.is_skip and not sb.skip_admissible:
                    raise SearchSpaceError(
                        f"superblock {i}: skip candidate inadmissible "
                        f"(c_in={sb.c_in}, c_out={sb.c_out}, stride={sb.stride})"
                    )
            prev_c = sb.c_out
            prev_os = expected_os
        if self.trailing_conv is not None and self.trailing_conv.c_in != prev_c:
            raise SearchSpaceError(
                f"trailing conv c_in={self.trailing_conv.c_in} does not match "
                f"encoder output channels {prev_c}"
            )
        if not 0 <= self.low_level_tap < len(self.superblocks):
            raise SearchSpaceError(f"low_level_tap {self.low_level_tap} out of range")
        tap_os = self.superblocks[self.low_level_tap].output_stride
        if tap_os >= self.final_output_stride:
            raise SearchSpaceError(
                f"low_level_tap must sit at a higher resolution than the encoder "
                f"output (tap output_stride {tap_os} >= {self.final_output_stride})"
            )


@dataclass(frozen=True)
class ArchPath:
    """One candidate index per superblock; a discrete architecture."""

    choices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.choices)

    def mnemonics(self) -> list[str]:
        return [CANDIDATES[j].mnemonic for j in self.choices]


@dataclass(frozen=True)
class PathCheck:
    valid: bool
    index: int | None = None
    reason: str | None = None


# ---------------------------------------------------------------------------
# Built-in macro plans. Rows are (c_in, c_out, stride). Output strides follow
# from the stride chain; the first searched row of the large/xlarge plans is
# therefore at output stride 2 even though the source tables annotate it as 4
# (the annotation contradicts its own stride column and the stem).
# ---------------------------------------------------------------------------

_STEM = ConvSpec(c_in=3, c_out=16, kernel=3, stride=2)

_SMALL_ROWS = [
    (16, 16, 2),
    (16, 16, 1),
    (16, 16, 1),
    (16, 16, 1),
    (16, 24, 2),
    (24, 24, 1),
    (24, 24, 1),
    (24, 24, 1),
    (24, 40, 2),
    (40, 40, 1),
    (40, 40, 1),
    (40, 40, 1),
    (40, 48, 1),
    (48, 48, 1),
    (48, 48, 1),
    (48, 48, 1),
    (48, 96, 1),
    (96, 96, 1),
    (96, 96, 1),
    (96, 96, 1),
]

_LARGE_ROWS = [
    (16, 24, 1),
    (24, 32, 2),
    (32, 32, 1),
    (32, 32, 1),
    (32, 32, 1),
    (32, 48, 2),
    (48, 48, 1),
    (48, 48, 1),
    (48, 48, 1),
    (48, 96, 2),
    (96, 96, 1),
    (96, 96, 1),
    (96, 96, 1),
    (96, 144, 1),
    (144, 144, 1),
    (144, 144, 1),
    (144, 144, 1),
    (144, 240, 1),
    (240, 240, 1),
    (240, 240, 1),
    (240, 240, 1),
    (240, 240, 1),
]

_XLARGE_ROWS = [
    (16, 24, 1),
    (24, 24, 2),
    (24, 24, 1),
    (24, 24, 1),
    (24, 24, 1),
    (24, 32, 2),
    (32, 32, 1),
    (32, 32, 1),
    (32, 32, 1),
    (32, 64, 2),
    (64, 64, 1),
    (64, 64, 1),
    (64, 64, 1),
    (64, 96, 1),
    (96, 96, 1),
    (96, 96, 1),
    (96, 96, 1),
    (96, 160, 1),
    (160, 160, 1),
    (160, 160, 1),
    (160, 160, 1),
    (160, 160, 1),
]


def _build_superblocks(rows) -> tuple[SuperblockSpec, ...]:
    out = []
    os = _STEM.stride
    for i, (c_in, c_out, stride) in enumerate(rows):
        os *= stride
        skip_ok = stride == 1 and c_out >= c_in
        cands = CANDIDATES if skip_ok else CANDIDATES[:SKIP_INDEX]
        out.append(
            SuperblockSpec(
                index=i,
                c_in=c_in,
                c_out=c_out,
                stride=stride,
                output_stride=os,
                candidates=cands,
            )
        )
    return tuple(out)


def _last_at_output_stride(superblocks, os: int) -> int:
    tap = -1
    for sb in superblocks:
        if sb.output_stride == os:
            tap = sb.index
    if tap < 0:
        raise SearchSpaceError(f"no superblock at output stride {os}")
    return tap


def _make_builtin(name: str) -> MacroArch:
    if name == "small":
        sbs = _build_superblocks(_SMALL_ROWS)
        return MacroArch(
            name="small",
            stem=_STEM,
            superblocks=sbs,
            decoder=DecoderSpec("lr_aspp", internal_channels=128, num_classes=19),
            low_level_tap=_last_at_output_stride(sbs, 8),
        )
    if name == "large":
        sbs = _build_superblocks(_LARGE_ROWS)
        return MacroArch(
            name="large",
            stem=_STEM,
            superblocks=sbs,
            decoder=DecoderSpec("lr_aspp", internal_channels=128, num_classes=19),
            low_level_tap=_last_at_output_stride(sbs, 8),
        )
    if name == "xlarge":
        sbs = _build_superblocks(_XLARGE_ROWS)
        return MacroArch(
            name="xlarge",
            stem=_STEM,
            superblocks=sbs,
            decoder=DecoderSpec("depthwise_aspp", internal_channels=256, num_classes=19),
            low_level_tap=_last_at_output_stride(sbs, 4),
            # The source table lists this conv with 96 input channels, which
            # contradicts the 160-channel block right before it; we follow the
            # channel chain.
            trailing_conv=ConvSpec(c_in=160, c_out=256, kernel=1),
        )
    raise SearchSpaceError(f"unknown space {name!r}; valid: small, large, xlarge")


_BUILTIN_CACHE: dict[str, MacroArch] = {}


def builtin_space(name: str) -> MacroArch:
    """Return one of the three built-in macro architectures."""
    if name not in _BUILTIN_CACHE:
        _BUILTIN_CACHE[name] = _make_builtin(name)
    return _BUILTIN_CACHE[name]


# Discovered layer sequences for the built-in spaces, one mnemonic per
# superblock, in (mac-optimized, latency-optimized) column order.

_BUILTIN_PATHS: dict[str, list[str]] = {
    "mac_small": [
        "k3_d1_e1_g2", "k3_d1_e1_g1", "k3_d1_e1_g1", "k3_d1_e1_g2",
        "k5_d1_e6_g1", "k3_d1_e1_g1", "k3_d1_e1_g1", "k3_d2_e1_g2",
        "k5_d1_e6_g1", "k3_d2_e6_g1", "skip", "k3_d1_e1_g2",
        "k5_d1_e6_g1", "k3_d2_e3_g1", "k3_d2_e1_g1", "k3_d2_e1_g1",
        "k3_d2_e6_g1", "k3_d2_e1_g2", "k3_d2_e1_g2", "k3_d2_e1_g2",
    ],
    "lat_small": [
        "k3_d1_e1_g1", "skip", "skip", "skip",
        "k3_d1_e6_g1", "k3_d1_e6_g1", "skip", "skip",
        "k5_d1_e6_g1", "k3_d2_e6_g1", "k5_d1_e1_g2", "k3_d1_e1_g2",
        "k3_d2_e6_g1", "k3_d2_e6_g1", "k3_d2_e6_g1", "k3_d2_e1_g1",
        "k3_d2_e6_g1", "k3_d2_e3_g1", "k3_d2_e3_g1", "k3_d2_e3_g1",
    ],
    "mac_large": [
        "k3_d1_e1_g2", "k3_d1_e6_g1", "k3_d2_e1_g2", "k3_d1_e1_g2",
        "k3_d1_e1_g2", "k5_d1_e6_g1", "k5_d1_e6_g1", "k3_d2_e6_g1",
        "k5_d1_e6_g1", "k5_d1_e6_g1", "k5_d1_e6_g1", "k5_d1_e1_g1",
        "k3_d1_e3_g1", "k5_d1_e6_g1", "k3_d1_e1_g1", "k5_d1_e1_g1",
        "k3_d2_e3_g1", "k3_d2_e6_g1", "k3_d2_e1_g2", "k3_d2_e1_g2",
        "k3_d2_e1_g2", "k3_d2_e1_g1",
    ],
    "lat_large": [
        "skip", "k3_d1_e6_g1", "k3_d1_e3_g1", "k3_d2_e1_g1",
        "k3_d1_e3_g1", "k5_d1_e6_g1", "k3_d1_e6_g1", "k3_d1_e3_g1",
        "k3_d2_e6_g1", "k5_d1_e6_g1", "k5_d1_e1_g1", "k5_d1_e1_g1",
        "k5_d1_e1_g2", "k3_d2_e6_g1", "k3_d2_e6_g1", "k3_d2_e6_g1",
        "k3_d1_e1_g1", "k3_d2_e6_g1", "k3_d2_e6_g1", "k3_d2_e6_g1",
        "k3_d2_e6_g1", "k3_d2_e6_g1",
    ],
    "mac_xlarge": [
        "k3_d1_e1_g2", "k3_d1_e3_g1", "k3_d1_e1_g2", "k5_d1_e1_g1",
        "k3_d2_e3_g1", "k5_d1_e6_g1", "k5_d1_e1_g2", "k3_d2_e1_g2",
        "k3_d1_e3_g1", "k5_d1_e6_g1", "k3_d1_e3_g1", "skip",
        "k3_d2_e1_g2", "k5_d1_e6_g1", "k3_d1_e1_g1", "k5_d1_e6_g1",
        "skip", "k3_d2_e6_g1", "k3_d2_e1_g2", "k3_d2_e1_g2",
        "k3_d2_e1_g2", "k3_d2_e3_g1",
    ],
    "lat_xlarge": [
        "skip", "k3_d1_e3_g1", "k3_d1_e3_g1", "k3_d1_e3_g1",
        "k3_d2_e1_g1", "k3_d1_e6_g1", "k3_d1_e3_g1", "k5_d1_e6_g1",
        "k5_d1_e1_g2", "k5_d1_e6_g1", "k3_d1_e6_g1", "k3_d2_e1_g2",
        "k3_d1_e6_g1", "k5_d1_e6_g1", "k3_d2_e3_g1", "k3_d2_e1_g2",
        "k3_d1_e3_g1", "k3_d2_e6_g1", "k3_d2_e3_g1", "k5_d1_e1_g1",
        "k3_d2_e3_g1", "k3_d2_e6_g1",
    ],
}

_PATH_SPACE = {
    "mac_small": "small", "lat_small": "small",
    "mac_large": "large", "lat_large": "large",
    "mac_xlarge": "xlarge", "lat_xlarge": "xlarge",
}


def builtin_paths(name: str) -> ArchPath:
    """Return a discovered architecture path by name (e.g. ``mac_small``)."""
    if name not in _BUILTIN_PATHS:
        valid = ", ".join(sorted(_BUILTIN_PATHS))
        raise SearchSpaceError(f"unknown path {name!r}; valid: {valid}")
    return ArchPath(tuple(candidate_index(m) for m in _BUILTIN_PATHS[name]))


def builtin_path_space(name: str) -> str:
    """Name of the space a built-in path belongs to."""
    if name not in _PATH_SPACE:
        raise SearchSpaceError(f"unknown path {name!r}")
    return _PATH_SPACE[name]


def validate_path(path: ArchPath, macro: MacroArch) -> PathCheck:
    """Check a path against a macro architecture; reports the first violation."""
    if len(path) != macro.num_superblocks:
        return PathCheck(
            False,
            None,
            f"path length {len(path)} != {macro.num_superblocks} superblocks",
        )
    for sb, j in zip(macro.superblocks, path.choices):
        if not 0 <= j < len(CANDIDATES):
            return PathCheck(False, sb.index, f"candidate index {j} out of range")
        cand = CANDIDATES[j]
        if cand.is_skip and not sb.skip_admissible:
            return PathCheck(
                False,
                sb.index,
                f"skip inadmissible (c_in={sb.c_in}, c_out={sb.c_out}, stride={sb.stride})",
            )
    return PathCheck(True)


def output_shape(
    superblock: SuperblockSpec, input_shape: tuple[int, int, int]
) -> tuple[int, int, int]:
    """Map (H, W, channels) through one superblock.

    Same-style padding keeps spatial dims fixed apart from the stride.
    """
    h, w, c = input_shape
    if c != superblock.c_in:
        raise SearchSpaceError(
            f"superblock {superblock.index}: expected {superblock.c_in} input "
            f"channels, got {c}"
        )
    s = superblock.stride
    if h % s or w % s:
        raise SearchSpaceError(
            f"superblock {superblock.index}: spatial dims {h}x{w} not divisible "
            f"by stride {s}"
        )
    return (h // s, w // s, superblock.c_out)


# ---------------------------------------------------------------------------
# Serialization. The document schema carries only macro-level constraints;
# the candidate list is always the canonical 13 entries.
# ---------------------------------------------------------------------------


def dump_search_space(macro: MacroArch) -> dict:
    doc = {
        "name": macro.name,
        "stem": {
            "c_in": macro.stem.c_in,
            "c_out": macro.stem.c_out,
            "kernel": macro.stem.kernel,
            "stride": macro.stem.stride,
        },
        "superblocks": [
            {
                "c_in": sb.c_in,
                "c_out": sb.c_out,
                "stride": sb.stride,
                "output_stride": sb.output_stride,
            }
            for sb in macro.superblocks
        ],
        "decoder": {
            "kind": macro.decoder.kind,
            "channels": macro.decoder.internal_channels,
            "num_classes": macro.decoder.num_classes,
        },
        "low_level_tap": macro.low_level_tap,
    }
    if macro.trailing_conv is not None:
        tc = macro.trailing_conv
        doc["trailing_conv"] = {"c_in": tc.c_in, "c_out": tc.c_out, "kernel": tc.kernel}
    return doc


def load_search_space(doc) -> MacroArch:
    """Build a MacroArch from a parsed JSON document (or a file path / str)."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    elif hasattr(doc, "read"):
        doc = json.load(doc)
    if not isinstance(doc, dict):
        raise SearchSpaceError("search-space document must be a JSON object")
    try:
        stem_doc = doc["stem"]
        stem = ConvSpec(
            c_in=int(stem_doc["c_in"]),
            c_out=int(stem_doc["c_out"]),
            kernel=int(stem_doc["kernel"]),
            stride=int(stem_doc["stride"]),
        )
        rows = [
            (int(r["c_in"]), int(r["c_out"]), int(r["stride"]), int(r["output_stride"]))
            for r in doc["superblocks"]
        ]
        dec_doc = doc["decoder"]
        decoder = DecoderSpec(
            kind=str(dec_doc["kind"]),
            internal_channels=int(dec_doc["channels"]),
            num_classes=int(dec_doc["num_classes"]),
        )
        tap = int(doc["low_level_tap"])
        name = str(doc.get("name", "custom"))
    except (KeyError, TypeError) as exc:
        raise SearchSpaceError(f"search-space document missing field: {exc}") from exc
    trailing = None
    if "trailing_conv" in doc:
        tc = doc["trailing_conv"]
        trailing = ConvSpec(c_in=int(tc["c_in"]), c_out=int(tc["c_out"]), kernel=int(tc["kernel"]))
    superblocks = []
    for i, (c_in, c_out, stride, os) in enumerate(rows):
        skip_ok = stride == 1 and c_out >= c_in
        cands = CANDIDATES if skip_ok else CANDIDATES[:SKIP_INDEX]
        superblocks.append(
            SuperblockSpec(
                index=i, c_in=c_in, c_out=c_out, stride=stride,
                output_stride=os, candidates=cands,
            )
        )
    return MacroArch(
        name=name,
        stem=stem,
        superblocks=tuple(superblocks),
        decoder=decoder,
        low_level_tap=tap,
        trailing_conv=trailing,
    )


def dump_path(path: ArchPath) -> list[str]:
    return path.mnemonics()


def load_path(doc) -> ArchPath:
    """Parse an architecture path from a JSON list of candidate mnemonics."""
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    elif hasattr(doc, "read"):
        doc = json.load(doc)
    if not isinstance(doc, list):
        raise SearchSpaceError("path document must be a JSON list of mnemonics")
    return ArchPath(tuple(candidate_index(str(m)) for m in doc))


def rename(macro: MacroArch, name: str) -> MacroArch:
    return replace(macro, name=name)
