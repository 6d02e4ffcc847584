"""The stochastic supernetwork and its co-optimization loop.

One network holds every candidate block of every superblock. Each forward
pass draws a relaxed categorical sample per superblock and mixes the
candidate outputs with the sampled weights; the task loss plus the
alpha-weighted expected resource cost trains convolution weights and
architecture logits together. Low-probability candidates are pruned at
epoch boundaries.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from . import tensor_engine as te
from .cost_model import CostTable, expected_cost
from .gumbel import TemperatureSchedule, ThetaMatrix, anneal, gumbel_noise, probs
from .search_space import CANDIDATES, SKIP_INDEX, ArchPath, MacroArch

__all__ = [
    "SearchConfig",
    "SearchResult",
    "SearchAbort",
    "Supernet",
    "train_step",
    "prune",
    "search",
    "result_to_json",
]

logger = logging.getLogger(__name__)

# Seed-sequence namespaces so every random stream is independent of loop order.
_NS_WEIGHTS = 0
_NS_GUMBEL = 1
_NS_BATCH = 2


class SearchAbort(RuntimeError):
    """Raised when training hits a non-finite loss."""


@dataclass(frozen=True)
class SearchConfig:
    alpha: float = 0.0
    epochs: int = 10
    steps_per_epoch: int = 8
    batch_size: int = 16
    lr_w: float = 0.05
    lr_theta: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-5
    warmup_epochs: int = 2
    prune_threshold: float = 0.005
    seed: int = 0
    temp_start: float = 5.0
    temp_end: float = 1.0
    temp_shape: str = "linear"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not 0 <= self.prune_threshold < 1:
            raise ValueError("prune_threshold must lie in [0, 1)")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("need 0 <= warmup_epochs < epochs")
        if self.lr_w < 0 or self.lr_theta <= 0:
            raise ValueError("learning rates must be positive (lr_w may be 0 to freeze w)")

    def schedule(self) -> TemperatureSchedule:
        return TemperatureSchedule(
            start=self.temp_start,
            end=self.temp_end,
            total_steps=self.epochs * self.steps_per_epoch,
            shape=self.temp_shape,
        )

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown search config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PruneEvent:
    step: int
    superblock: int
    candidate: int
    probability: float

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "superblock": self.superblock,
            "candidate": self.candidate,
            "mnemonic": CANDIDATES[self.candidate].mnemonic,
            "probability": self.probability,
        }


@dataclass
class SearchResult:
    theta: ThetaMatrix
    trajectory: list[dict]  # per epoch: {"loss", "task_loss", "resource_loss"}
    prune_events: list[PruneEvent]
    config: SearchConfig
    space_name: str
    cost_metric: str
    initial_expected_cost: float
    candidate_evals: int
    supernet: "Supernet" = field(repr=False, default=None)

    def argmax_path(self) -> ArchPath:
        p = self.theta.probs_matrix()
        return ArchPath(tuple(int(np.argmax(row)) for row in p))

    def to_dict(self) -> dict:
        return {
            "space": self.space_name,
            "cost_metric": self.cost_metric,
            "config": self.config.to_dict(),
            "theta": [[float(v) for v in row] for row in self.theta.logits],
            "active_mask": [[bool(v) for v in row] for row in self.theta.active_mask],
            "trajectory": self.trajectory,
            "prune_events": [e.to_dict() for e in self.prune_events],
            "initial_expected_cost": self.initial_expected_cost,
            "candidate_evals": self.candidate_evals,
            "argmax_path": self.argmax_path().mnemonics(),
        }


def result_to_json(result: SearchResult) -> str:
    return json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


class Supernet:
    """All candidate weights, the stem and decoder, plus architecture logits.

    Weights are initialized per (superblock, candidate) from independent seed
    streams, so initialization does not depend on construction order.
    Computation runs in float64 to keep the resource-loss bookkeeping in the
    graph bit-comparable with the standalone expected-cost evaluation.
    """

    def __init__(self, macro: MacroArch, seed: int, dtype=np.float64):
        self.macro = macro
        self.seed = seed
        self.dtype = dtype
        self.candidate_evals = 0
        self.active = self._admissible_mask(macro)
        self.theta_rows = [
            te.Tensor(np.zeros(len(CANDIDATES), dtype=dtype), requires_grad=True)
            for _ in macro.superblocks
        ]
        self._bn_states: list[te.BatchNormState] = []
        self.stem = self._init_conv_bn(
            _rng(seed, _NS_WEIGHTS, 0, 0),
            macro.stem.c_out, macro.stem.c_in, macro.stem.kernel,
        )
        self.blocks: list[list[dict | None]] = []
        for sb in macro.superblocks:
            row = []
            for j, cand in enumerate(CANDIDATES):
                if cand.is_skip or not sb.admissible(cand):
                    row.append(None)
                    continue
                rng = _rng(seed, _NS_WEIGHTS, sb.index + 1, j)
                row.append(self._init_candidate(rng, cand, sb.c_in, sb.c_out))
            self.blocks.append(row)
        self.trailing = None
        if macro.trailing_conv is not None:
            tc = macro.trailing_conv
            self.trailing = self._init_conv_bn(
                _rng(seed, _NS_WEIGHTS, len(macro.superblocks) + 1, 0),
                tc.c_out, tc.c_in, tc.kernel,
            )
        self.decoder = self._init_decoder(_rng(seed, _NS_WEIGHTS, len(macro.superblocks) + 2, 0))

    # ----- initialization ---------------------------------------------------

    def _he(self, rng, c_out, c_in, k) -> te.Tensor:
        std = np.sqrt(2.0 / (c_in * k * k))
        w = rng.normal(0.0, std, size=(c_out, c_in, k, k)).astype(self.dtype)
        return te.Tensor(w, requires_grad=True)

    def _affine(self, channels) -> tuple[te.Tensor, te.Tensor, te.BatchNormState]:
        gamma = te.Tensor(np.ones(channels, dtype=self.dtype), requires_grad=True)
        beta = te.Tensor(np.zeros(channels, dtype=self.dtype), requires_grad=True)
        state = te.BatchNormState.for_channels(channels, dtype=self.dtype)
        self._bn_states.append(state)
        return gamma, beta, state

    def _init_conv_bn(self, rng, c_out, c_in, k) -> dict:
        gamma, beta, state = self._affine(c_out)
        return {"w": self._he(rng, c_out, c_in, k), "g": gamma, "b": beta, "bn": state}

    def _init_candidate(self, rng, cand, c_in, c_out) -> dict:
        mid = cand.expansion * c_in
        params: dict = {}
        if cand.expansion != 1:
            params["exp"] = self._init_conv_bn(rng, mid, c_in // cand.groups, 1)
        params["dw"] = {
            "w": self._he(rng, mid, 1, cand.kernel),
        }
        params["dw"].update(zip(("g", "b", "bn"), self._affine(mid)))
        params["proj"] = self._init_conv_bn(rng, c_out, mid // cand.groups, 1)
        return params

    def _init_decoder(self, rng) -> dict:
        dec = self.macro.decoder
        ic = dec.internal_channels
        k = dec.num_classes
        cf = self.macro.final_channels
        ct = self.macro.tap_superblock().c_out
        if dec.kind == "lr_aspp":
            return {
                "ctx": self._init_conv_bn(rng, ic, cf, 3),
                "gate_w": self._he(rng, ic, cf, 1),
                "cls_hi_w": self._he(rng, k, ic, 1),
                "cls_lo_w": self._he(rng, k, ct, 1),
            }
        branches = [self._init_conv_bn(rng, ic, cf, 1)]
        for _ in range(3):
            dw = {"w": self._he(rng, cf, 1, 3)}
            dw.update(zip(("g", "b", "bn"), self._affine(cf)))
            branches.append({"dw": dw, "pw": self._init_conv_bn(rng, ic, cf, 1)})
        branches.append(self._init_conv_bn(rng, ic, cf, 1))  # pooled branch
        refine_dw = {"w": self._he(rng, ic + 48, 1, 3)}
        refine_dw.update(zip(("g", "b", "bn"), self._affine(ic + 48)))
        return {
            "branches": branches,
            "merge": self._init_conv_bn(rng, ic, 5 * ic, 1),
            "low": self._init_conv_bn(rng, 48, ct, 1),
            "refine_dw": refine_dw,
            "refine_pw": self._init_conv_bn(rng, ic, ic + 48, 1),
            "cls_w": self._he(rng, k, ic, 1),
        }

    @staticmethod
    def _admissible_mask(macro: MacroArch) -> np.ndarray:
        mask = np.zeros((macro.num_superblocks, len(CANDIDATES)), dtype=bool)
        for sb in macro.superblocks:
            for j, cand in enumerate(CANDIDATES):
                mask[sb.index, j] = sb.admissible(cand)
        return mask

    # ----- parameters and state --------------------------------------------

    def _candidate_tensors(self, params: dict) -> list[te.Tensor]:
        out = []
        for key in ("exp", "dw", "proj"):
            if key in params:
                stage = params[key]
                out.extend(stage[n] for n in ("w", "g", "b"))
        return out

    def weight_parameters(self) -> list[te.Tensor]:
        out = [self.stem[n] for n in ("w", "g", "b")]
        for row in self.blocks:
            for params in row:
                if params is not None:
                    out.extend(self._candidate_tensors(params))
        if self.trailing is not None:
            out.extend(self.trailing[n] for n in ("w", "g", "b"))
        dec = self.decoder
        if self.macro.decoder.kind == "lr_aspp":
            out.extend(dec["ctx"][n] for n in ("w", "g", "b"))
            out.extend([dec["gate_w"], dec["cls_hi_w"], dec["cls_lo_w"]])
        else:
            for br in dec["branches"]:
                if "dw" in br:
                    out.extend(br["dw"][n] for n in ("w", "g", "b"))
                    out.extend(br["pw"][n] for n in ("w", "g", "b"))
                else:
                    out.extend(br[n] for n in ("w", "g", "b"))
            for key in ("merge", "low", "refine_pw"):
                out.extend(dec[key][n] for n in ("w", "g", "b"))
            out.extend(dec["refine_dw"][n] for n in ("w", "g", "b"))
            out.append(dec["cls_w"])
        return out

    def theta_matrix(self) -> ThetaMatrix:
        logits = np.stack([row.data.astype(np.float64) for row in self.theta_rows])
        return ThetaMatrix(logits, self.active.copy())

    def set_theta(self, theta: ThetaMatrix):
        if theta.logits.shape != (len(self.theta_rows), len(CANDIDATES)):
            raise ValueError("theta shape mismatch")
        for row, values in zip(self.theta_rows, theta.logits):
            row.data[...] = values.astype(self.dtype)
        self.active = theta.active_mask.copy()

    def state_dict(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}

        def put_stage(prefix, stage):
            out[f"{prefix}.w"] = stage["w"].data
            out[f"{prefix}.g"] = stage["g"].data
            out[f"{prefix}.b"] = stage["b"].data
            out[f"{prefix}.rm"] = stage["bn"].running_mean
            out[f"{prefix}.rv"] = stage["bn"].running_var

        put_stage("stem", self.stem)
        for i, row in enumerate(self.blocks):
            for j, params in enumerate(row):
                if params is None:
                    continue
                for key in ("exp", "dw", "proj"):
                    if key in params:
                        put_stage(f"block{i}.{j}.{key}", params[key])
        if self.trailing is not None:
            put_stage("trailing", self.trailing)
        dec = self.decoder
        if self.macro.decoder.kind == "lr_aspp":
            put_stage("dec.ctx", dec["ctx"])
            out["dec.gate_w"] = dec["gate_w"].data
            out["dec.cls_hi_w"] = dec["cls_hi_w"].data
            out["dec.cls_lo_w"] = dec["cls_lo_w"].data
        else:
            for bi, br in enumerate(dec["branches"]):
                if "dw" in br:
                    put_stage(f"dec.b{bi}.dw", br["dw"])
                    put_stage(f"dec.b{bi}.pw", br["pw"])
                else:
                    put_stage(f"dec.b{bi}", br)
            put_stage("dec.merge", dec["merge"])
            put_stage("dec.low", dec["low"])
            put_stage("dec.refine_dw", dec["refine_dw"])
            put_stage("dec.refine_pw", dec["refine_pw"])
            out["dec.cls_w"] = dec["cls_w"].data
        out["theta"] = np.stack([r.data for r in self.theta_rows])
        out["active"] = self.active
        return out

    def load_state_dict(self, state: dict[str, np.ndarray]):
        current = self.state_dict()
        missing = set(current) - set(state)
        if missing:
            raise ValueError(f"weight archive missing keys: {sorted(missing)[:5]}...")
        for key, arr in current.items():
            src = state[key]
            if src.shape != arr.shape:
                raise ValueError(f"shape mismatch for {key}: {src.shape} vs {arr.shape}")
            arr[...] = src
        self.active = self.active.astype(bool)

    # ----- forward ----------------------------------------------------------

    def _conv_bn_act(self, x, stage, *, stride=1, dilation=1, groups=1,
                     training=False, act=True):
        y = te.conv2d(x, stage["w"], stride=stride, dilation=dilation, groups=groups)
        y = te.batchnorm2d(y, stage["g"], stage["b"], stage["bn"], training)
        return te.relu(y) if act else y

    def candidate_forward(self, x: te.Tensor, sb_index: int, j: int,
                          training: bool) -> te.Tensor:
        """Run one candidate block; skip returns the input unchanged."""
        cand = CANDIDATES[j]
        sb = self.macro.superblocks[sb_index]
        if not sb.admissible(cand):
            raise ValueError(
                f"candidate {cand.mnemonic} inadmissible at superblock {sb_index}"
            )
        if cand.is_skip:
            if sb.c_out == sb.c_in:
                return x
            # Widening skip: identity plus zero channel padding, parameter-free.
            b, _, h, w = x.data.shape
            pad = te.Tensor(np.zeros((b, sb.c_out - sb.c_in, h, w), dtype=self.dtype))
            return te.concat([x, pad], axis=1)
        self.candidate_evals += 1
        params = self.blocks[sb_index][j]
        h = x
        if "exp" in params:
            h = self._conv_bn_act(h, params["exp"], groups=cand.groups, training=training)
        mid = cand.expansion * sb.c_in
        h = te.conv2d(
            h, params["dw"]["w"], stride=sb.stride, dilation=cand.dilation, groups=mid
        )
        h = te.batchnorm2d(h, params["dw"]["g"], params["dw"]["b"], params["dw"]["bn"], training)
        h = te.relu(h)
        h = self._conv_bn_act(h, params["proj"], groups=cand.groups, training=training,
                              act=False)
        if sb.c_in == sb.c_out and sb.stride == 1:
            h = te.add(h, x)
        return h

    def superblock_forward(self, x: te.Tensor, sb_index: int, weights: te.Tensor | None,
                           active_idx: np.ndarray, training: bool) -> te.Tensor:
        """Mix active candidate outputs with the given selection weights.

        ``weights`` must align with ``active_idx``; a single active candidate
        short-circuits to a plain block forward.
        """
        if len(active_idx) == 1:
            return self.candidate_forward(x, sb_index, int(active_idx[0]), training)
        outs = [self.candidate_forward(x, sb_index, int(j), training) for j in active_idx]
        return te.mix(outs, weights)

    def sample_selection(self, sb_index: int, t: float, step: int) -> te.Tensor:
        """Relaxed selection weights for one superblock at one step.

        The Gumbel noise stream is keyed by (seed, step, superblock), so
        samples do not depend on evaluation order.
        """
        idx = np.nonzero(self.active[sb_index])[0]
        rng = _rng(self.seed, _NS_GUMBEL, step, sb_index)
        noise = gumbel_noise(rng, len(idx)).astype(self.dtype)
        logits = te.gather1d(self.theta_rows[sb_index], idx)
        z = te.mul(te.add(logits, te.Tensor(noise)), 1.0 / t)
        return te.masked_softmax(z, np.ones(len(idx), dtype=bool))

    def forward(self, images: np.ndarray, *, path: ArchPath | None = None,
                t: float | None = None, step: int = 0,
                training: bool = False) -> te.Tensor:
        """Full network forward; hard path selection when ``path`` is given,
        otherwise one fresh relaxed sample per superblock."""
        x = te.Tensor(np.asarray(images, dtype=self.dtype))
        x = self._conv_bn_act(x, self.stem, stride=self.macro.stem.stride, training=training)
        tap_out = None
        for sb in self.macro.superblocks:
            i = sb.index
            if path is not None:
                x = self.candidate_forward(x, i, path.choices[i], training)
            else:
                if t is None:
                    raise ValueError("mixture forward needs a temperature")
                idx = np.nonzero(self.active[i])[0]
                y = self.sample_selection(i, t, step) if len(idx) > 1 else None
                x = self.superblock_forward(x, i, y, idx, training)
            if i == self.macro.low_level_tap:
                tap_out = x
        if self.trailing is not None:
            x = self._conv_bn_act(x, self.trailing, training=training)
        return self._decoder_forward(x, tap_out, training)

    def _decoder_forward(self, high: te.Tensor, tap: te.Tensor, training: bool) -> te.Tensor:
        macro = self.macro
        dec = self.decoder
        up_factor = macro.final_output_stride // macro.tap_superblock().output_stride
        if macro.decoder.kind == "lr_aspp":
            ctx = self._conv_bn_act(high, dec["ctx"], training=training)
            gate = te.sigmoid(te.conv2d(te.global_avg_pool(high), dec["gate_w"]))
            gated = te.mul(ctx, gate)
            up = te.bilinear_upsample(gated, up_factor)
            logits = te.add(te.conv2d(up, dec["cls_hi_w"]), te.conv2d(tap, dec["cls_lo_w"]))
            return te.bilinear_upsample(logits, macro.tap_superblock().output_stride)
        branches = []
        br = dec["branches"]
        branches.append(self._conv_bn_act(high, br[0], training=training))
        cf = macro.final_channels
        for k, rate in zip((1, 2, 3), (2, 4, 6)):
            h = te.conv2d(high, br[k]["dw"]["w"], dilation=rate, groups=cf)
            h = te.batchnorm2d(h, br[k]["dw"]["g"], br[k]["dw"]["b"], br[k]["dw"]["bn"], training)
            h = te.relu(h)
            branches.append(self._conv_bn_act(h, br[k]["pw"], training=training))
        pooled = self._conv_bn_act(te.global_avg_pool(high), br[4], training=training)
        zeros = te.Tensor(np.zeros_like(branches[0].data))
        branches.append(te.add(pooled, zeros))  # broadcast to spatial dims
        merged = self._conv_bn_act(te.concat(branches, axis=1), dec["merge"], training=training)
        merged = te.bilinear_upsample(merged, up_factor)
        low = self._conv_bn_act(tap, dec["low"], training=training)
        h = te.concat([merged, low], axis=1)
        h = te.conv2d(h, dec["refine_dw"]["w"], groups=h.data.shape[1])
        h = te.batchnorm2d(
            h, dec["refine_dw"]["g"], dec["refine_dw"]["b"], dec["refine_dw"]["bn"], training
        )
        h = te.relu(h)
        h = self._conv_bn_act(h, dec["refine_pw"], training=training)
        logits = te.conv2d(h, dec["cls_w"])
        return te.bilinear_upsample(logits, macro.tap_superblock().output_stride)


@dataclass
class SearchState:
    """Everything train_step mutates: the supernet, optimizers, and counters."""

    supernet: Supernet
    w_optimizer: te.SGD
    theta_optimizer: te.SGD
    cost_table: CostTable
    initial_expected_cost: float
    schedule: TemperatureSchedule


def _resource_loss(supernet: Supernet, table: CostTable, norm: float) -> te.Tensor:
    total = None
    for i, row in enumerate(supernet.theta_rows):
        idx = np.nonzero(supernet.active[i])[0]
        p = te.masked_softmax(te.gather1d(row, idx), np.ones(len(idx), dtype=bool))
        costs = te.Tensor((table.costs[i, idx] / norm).astype(supernet.dtype))
        term = te.tsum(te.mul(p, costs))
        total = term if total is None else te.add(total, term)
    return total


def train_step(state: SearchState, images: np.ndarray, labels: np.ndarray,
               config: SearchConfig, step: int) -> tuple[float, float, float]:
    """One co-optimization step; returns (loss, task_loss, resource_loss).

    A fresh Gumbel sample is drawn per superblock, both parameter sets are
    updated simultaneously from one backward pass, and theta stays frozen
    during warmup epochs.
    """
    net = state.supernet
    t = anneal(step, state.schedule)
    logits = net.forward(images, t=t, step=step, training=True)
    task = te.cross_entropy_2d(logits, labels)
    resource = _resource_loss(net, state.cost_table, state.initial_expected_cost)
    loss = te.add(task, te.mul(resource, config.alpha))
    values = (loss.item(), task.item(), resource.item())
    if not all(np.isfinite(v) for v in values):
        raise SearchAbort(
            f"non-finite loss at step {step}: loss={values[0]}, "
            f"task={values[1]}, resource={values[2]}"
        )
    state.w_optimizer.zero_grad()
    state.theta_optimizer.zero_grad()
    loss.backward()
    warmup = step < config.warmup_epochs * config.steps_per_epoch
    if config.lr_w > 0:
        state.w_optimizer.step()
    if not warmup:
        state.theta_optimizer.step()
    return values


def prune(state: SearchState, threshold: float, step: int) -> list[PruneEvent]:
    """Deactivate candidates whose selection probability fell below threshold.

    A row is never emptied: its most probable candidate survives even when
    every probability sits below the threshold.
    """
    net = state.supernet
    events = []
    for i, row in enumerate(net.theta_rows):
        mask = net.active[i]
        if mask.sum() <= 1:
            continue
        p = probs(row.data.astype(np.float64), mask)
        order = np.argsort(p)  # ascending; least probable pruned first
        for j in order:
            if not mask[j] or p[j] >= threshold:
                continue
            if mask.sum() <= 1:
                logger.info(
                    "refusing to prune candidate %d of superblock %d: last active", j, i
                )
                break
            mask[j] = False
            state.theta_optimizer.velocities[i][j] = 0.0
            events.append(PruneEvent(step, i, int(j), float(p[j])))
    return events


def search(config: SearchConfig, space: MacroArch, cost_table: CostTable,
           dataset, initial_active: np.ndarray | None = None) -> SearchResult:
    """Warmup, then joint training with per-step annealing and per-epoch pruning.

    ``dataset`` provides ``images`` (N, 3, H, W) and ``labels`` (N, H, W).
    ``initial_active`` restricts the candidate set up front (e.g. to train a
    single fixed path with the same loop). Deterministic for a fixed config
    seed.
    """
    if cost_table.num_superblocks != space.num_superblocks:
        raise ValueError("cost table does not match the search space")
    n = dataset.images.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    net = Supernet(space, seed=config.seed)
    if initial_active is not None:
        initial_active = np.asarray(initial_active, dtype=bool)
        if initial_active.shape != net.active.shape:
            raise ValueError("initial_active shape mismatch")
        if np.any(initial_active & ~net.active):
            raise ValueError("initial_active enables inadmissible candidates")
        if not initial_active.any(axis=1).all():
            raise ValueError("initial_active empties a superblock")
        net.active = initial_active.copy()
    e0 = expected_cost(net.theta_matrix(), cost_table)
    if e0 <= 0:
        raise ValueError("initial expected cost must be positive")
    state = SearchState(
        supernet=net,
        w_optimizer=te.SGD(net.weight_parameters(), lr=config.lr_w,
                           momentum=config.momentum, weight_decay=config.weight_decay),
        theta_optimizer=te.SGD(net.theta_rows, lr=config.lr_theta,
                               momentum=config.momentum, weight_decay=0.0),
        cost_table=cost_table,
        initial_expected_cost=e0,
        schedule=config.schedule(),
    )
    batch = min(config.batch_size, n)
    trajectory = []
    events: list[PruneEvent] = []
    step = 0
    for epoch in range(config.epochs):
        sums = np.zeros(3)
        for k in range(config.steps_per_epoch):
            rng = _rng(config.seed, _NS_BATCH, epoch, k)
            idx = rng.choice(n, size=batch, replace=False)
            values = train_step(state, dataset.images[idx], dataset.labels[idx],
                                config, step)
            sums += values
            step += 1
        trajectory.append(
            {
                "loss": float(sums[0] / config.steps_per_epoch),
                "task_loss": float(sums[1] / config.steps_per_epoch),
                "resource_loss": float(sums[2] / config.steps_per_epoch),
            }
        )
        if config.prune_threshold > 0:
            events.extend(prune(state, config.prune_threshold, step))
        logger.info(
            "epoch %d/%d loss=%.4f task=%.4f resource=%.4f active=%d",
            epoch + 1, config.epochs, *trajectory[-1].values(),
            int(net.active.sum()),
        )
    return SearchResult(
        theta=net.theta_matrix(),
        trajectory=trajectory,
        prune_events=events,
        config=config,
        space_name=space.name,
        cost_metric=cost_table.metric,
        initial_expected_cost=e0,
        candidate_evals=net.candidate_evals,
        supernet=net,
    )
