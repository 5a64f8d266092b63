"""Ablation grids over (method, k) cells with deterministic seeds and CSV output.

Two sweep axes:
  fixed-budget: N_input = k * n_over_k, so every cell feeds the decoder the
    same number of video tokens; k=1 is the no-compression baseline row.
  fixed-frames: N_input held fixed while k sweeps, so the decoder budget
    shrinks as N_input*l/k; rows are method-major, k-minor.

Each cell trains its own model from scratch with seed hash(base, method, k),
so cells are independent jobs; rows are emitted in grid order regardless of
how cells were scheduled.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .compressor import token_budget
from .errors import BadConfig, NonIntegralBudget
from .frontend import COMPRESSION_METHODS, FusionMethod
from .pipeline import ModelConfig, build_model, model_flops_per_clip
from .rng import derive_seed
from .synthclips import CATEGORY_ORDER, GenConfig, gen_dataset
from .training import TrainConfig, evaluate, train


class GridAxis(enum.Enum):
    FIXED_BUDGET = "fixed-budget"
    FIXED_FRAMES = "fixed-frames"


@dataclass(frozen=True)
class ExperimentSpec:
    axis: GridAxis
    methods: tuple[FusionMethod, ...] = COMPRESSION_METHODS
    k_values: tuple[int, ...] = (2, 4)
    n_over_k: int | None = None   # fixed-budget: frames per compressed group
    n_input: int | None = None    # fixed-frames: total input frames
    seed: int = 0                 # dataset seed; training seeds derive per cell
    train: TrainConfig = field(default_factory=TrainConfig)
    train_per_category: int = 20
    eval_per_category: int = 10
    height: int = 28
    width: int = 28
    patch: int = 14

    def __post_init__(self):
        if self.axis is GridAxis.FIXED_BUDGET and not self.n_over_k:
            raise BadConfig("fixed-budget axis needs n_over_k")
        if self.axis is GridAxis.FIXED_FRAMES and not self.n_input:
            raise BadConfig("fixed-frames axis needs n_input")
        if FusionMethod.BASELINE in self.methods:
            raise BadConfig("baseline is implied by k=1; list only compression methods")
        for k in self.k_values:
            if k < 1:
                raise BadConfig(f"compression ratio {k}")
            if self.axis is GridAxis.FIXED_FRAMES and self.n_input % k:
                raise BadConfig(f"k={k} does not divide n_input={self.n_input}")


@dataclass(frozen=True)
class RunResult:
    method: str
    k: int
    n_input: int
    l_decoder: int
    per_category: dict[str, float]
    accuracy: float
    final_loss: float
    wall_seconds: float
    flops_per_clip: int
    steps: int


def _cells(spec: ExperimentSpec):
    """(method, k, n_input) in emission order; k=1 collapses to the baseline."""
    cells = []
    if spec.axis is GridAxis.FIXED_BUDGET:
        for k in spec.k_values:
            n_input = k * spec.n_over_k
            if k == 1:
                cells.append((FusionMethod.BASELINE, 1, n_input))
            else:
                cells.extend((m, k, n_input) for m in spec.methods)
    else:
        if 1 in spec.k_values:
            cells.append((FusionMethod.BASELINE, 1, spec.n_input))
        for method in spec.methods:
            cells.extend((method, k, spec.n_input) for k in spec.k_values if k != 1)
    return cells


def run_cell(spec: ExperimentSpec, method: FusionMethod, k: int, n_input: int,
             datasets: dict | None = None) -> RunResult:
    """Train and score one grid cell from scratch. `datasets` caches the
    per-n_input train/eval sets across cells."""
    if datasets is None:
        datasets = {}
    if n_input not in datasets:
        gcfg = GenConfig(frames=n_input, height=spec.height, width=spec.width)
        data_seed = derive_seed(spec.seed, "data", n_input)
        train_ds, _ = gen_dataset(spec.train_per_category, derive_seed(data_seed, "train"), gcfg)
        eval_ds, _ = gen_dataset(spec.eval_per_category, derive_seed(data_seed, "eval"), gcfg)
        datasets[n_input] = (train_ds, eval_ds)
    train_ds, eval_ds = datasets[n_input]
    cfg = ModelConfig(method=method, k=k, n_input=n_input, height=spec.height,
                      width=spec.width, patch=spec.patch)
    budget = token_budget(n_input, cfg.tokens_per_group, k)
    if cfg.budget.l_decoder != budget.l_decoder:
        raise NonIntegralBudget(f"cell ({method.value}, k={k}): model budget "
                                f"{cfg.budget.l_decoder} != audit {budget.l_decoder}")
    cell_seed = derive_seed(spec.train.seed, method.value, k)
    bundle = build_model(cfg, cell_seed)
    outcome = train(bundle, train_ds, replace(spec.train, seed=cell_seed))
    score = evaluate(bundle, eval_ds)
    return RunResult(method=method.value, k=k, n_input=n_input,
                     l_decoder=budget.l_decoder, per_category=score.per_category,
                     accuracy=score.accuracy, final_loss=outcome.final_loss,
                     wall_seconds=outcome.wall_seconds,
                     flops_per_clip=model_flops_per_clip(cfg),
                     steps=outcome.steps_run)


def run_grid(spec: ExperimentSpec) -> list[RunResult]:
    datasets: dict = {}
    return [run_cell(spec, m, k, n, datasets) for m, k, n in _cells(spec)]


def run_grid_fixed_budget(spec: ExperimentSpec) -> list[RunResult]:
    if spec.axis is not GridAxis.FIXED_BUDGET:
        raise BadConfig(f"spec axis is {spec.axis.value}")
    return run_grid(spec)


def run_grid_fixed_frames(spec: ExperimentSpec) -> list[RunResult]:
    if spec.axis is not GridAxis.FIXED_FRAMES:
        raise BadConfig(f"spec axis is {spec.axis.value}")
    return run_grid(spec)


def results_to_csv(results, include_flops: bool = False) -> str:
    """Deterministic CSV: wall-clock is deliberately excluded so identical
    seeds give byte-identical files."""
    cols = ["method", "k", "n_input", "l_decoder"]
    cols += [f"acc_{c.value.lower()}" for c in CATEGORY_ORDER]
    cols += ["avg_acc", "final_loss"]
    if include_flops:
        cols.append("flops_per_clip")
    lines = [",".join(cols)]
    for r in results:
        cells = [r.method, str(r.k), str(r.n_input), str(r.l_decoder)]
        cells += [f"{r.per_category.get(c.value, 0.0):.6f}" for c in CATEGORY_ORDER]
        cells += [f"{r.accuracy:.6f}", f"{r.final_loss:.6f}"]
        if include_flops:
            cells.append(str(r.flops_per_clip))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
