"""Run configuration, single training runs and N-sweep studies."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import loss as mim
from .network import init_params, save_checkpoint
from .problem import h1_error, h1_norm, require_assumptions
from .registry import get_problem
from .trainer import TrainConfig, train, training_samples

SCHEMA = 1


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "network": {"depth", "widths", "activation", "weight_bound"},
    "boundary": {"kind", "g", "alpha"},
    "train": {"steps", "batch", "lr", "optimizer", "resample_every", "seed", "project_weights"},
    "eval": {"n_quad", "seed"},
}
_TOP = {"schema", "problem"} | set(_SECTIONS)
_STUDY = {"sample_counts", "trials", "output"}


@dataclass(frozen=True)
class RunConfig:
    problem: str
    widths: tuple[int, ...]
    activation: str = "tanh"
    weight_bound: float = 1.0
    kind: str = "dirichlet"
    alpha: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    n_quad: int = 1 << 17
    eval_seed: int = 12345

    def with_batch(self, batch: int, seed: int | None = None) -> RunConfig:
        seed = self.train.seed if seed is None else seed
        return replace(self, train=replace(self.train, batch=batch, seed=seed))

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, train=replace(self.train, seed=seed))


@dataclass(frozen=True)
class StudySpec:
    run: RunConfig
    sample_counts: tuple[int, ...]
    trials: int = 1
    output: str | None = None

    def __post_init__(self):
        if not self.sample_counts or any(b <= a for a, b in zip(self.sample_counts, self.sample_counts[1:])):
            raise ConfigError("study.sample_counts must be a nonempty strictly increasing list")
        if any(n < 1 for n in self.sample_counts):
            raise ConfigError("study.sample_counts entries must be >= 1")
        if self.trials < 1:
            raise ConfigError("study.trials must be >= 1")


def _unknown(section: str, got: dict, allowed: set):
    extra = sorted(set(got) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(extra)}")


def _typed(section, d, key, typ, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"missing {section}.{key}")
        return default
    v = d[key]
    if typ is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise ConfigError(f"{section}.{key} must be an integer")
    if typ is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
        raise ConfigError(f"{section}.{key} must be a number")
    if typ is bool and not isinstance(v, bool):
        raise ConfigError(f"{section}.{key} must be true or false")
    if typ is str and not isinstance(v, str):
        raise ConfigError(f"{section}.{key} must be a string")
    return typ(v)


def parse_config(doc: dict, allow_study: bool = False) -> tuple[RunConfig, dict | None]:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _unknown("config", doc, _TOP | ({"study"} if allow_study else set()))
    if doc.get("schema") != SCHEMA:
        raise ConfigError(f"config schema must be {SCHEMA}, got {doc.get('schema')!r}")
    problem = _typed("config", doc, "problem", str, required=True)
    sections = {}
    for name, allowed in _SECTIONS.items():
        sec = doc.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"{name} must be an object")
        _unknown(name, sec, allowed)
        sections[name] = sec
    net, bnd, tr, ev = (sections[k] for k in ("network", "boundary", "train", "eval"))
    widths = net.get("widths")
    if not isinstance(widths, list) or len(widths) < 2 or not all(isinstance(w, int) and w >= 1 for w in widths):
        raise ConfigError("network.widths must be a list of at least two positive integers")
    depth = _typed("network", net, "depth", int, len(widths) - 1)
    if depth != len(widths) - 1:
        raise ConfigError(f"network.depth = {depth} disagrees with {len(widths)} widths")
    activation = _typed("network", net, "activation", str, "tanh")
    if activation not in ("tanh", "logistic"):
        raise ConfigError("network.activation must be 'tanh' or 'logistic'")
    weight_bound = _typed("network", net, "weight_bound", float, 1.0)
    kind = _typed("boundary", bnd, "kind", str, None)
    g = _typed("boundary", bnd, "g", str, "manufactured")
    if g != "manufactured":
        raise ConfigError("boundary.g must be 'manufactured'")
    alpha = _typed("boundary", bnd, "alpha", float, 1.0)
    try:
        train_cfg = TrainConfig(
            steps=_typed("train", tr, "steps", int, 5000),
            batch=_typed("train", tr, "batch", int, 4096),
            learning_rate=_typed("train", tr, "lr", float, 1e-3),
            optimizer=_typed("train", tr, "optimizer", str, "adam"),
            resample_every=_typed("train", tr, "resample_every", int, 0),
            seed=_typed("train", tr, "seed", int, 0),
            project_weights=_typed("train", tr, "project_weights", bool, True),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"train: {exc}") from None
    n_quad = _typed("eval", ev, "n_quad", int, 1 << 17)
    if n_quad < 100:
        raise ConfigError("eval.n_quad must be >= 100")
    try:
        prob, _ = get_problem(problem, alpha=alpha)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    if kind is None:
        kind = prob.boundary.kind
    if kind != prob.boundary.kind:
        raise ConfigError(f"boundary.kind {kind!r} does not match problem {problem!r} ({prob.boundary.kind})")
    if widths[0] != prob.dim or widths[-1] != prob.dim + 1:
        raise ConfigError(f"network.widths must start with d = {prob.dim} and end with d+1 = {prob.dim + 1}")
    if not weight_bound > 0:
        raise ConfigError("network.weight_bound must be positive")
    run = RunConfig(problem, tuple(widths), activation, weight_bound, kind, alpha, train_cfg, n_quad,
                    _typed("eval", ev, "seed", int, 12345))
    return run, doc.get("study")


def load_config(path) -> RunConfig:
    return parse_config(_read_json(path))[0]


def load_study(path) -> StudySpec:
    run, study = parse_config(_read_json(path), allow_study=True)
    if not isinstance(study, dict):
        raise ConfigError("study spec needs a 'study' object")
    _unknown("study", study, _STUDY)
    counts = study.get("sample_counts")
    if not isinstance(counts, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in counts):
        raise ConfigError("study.sample_counts must be a list of integers")
    return StudySpec(run, tuple(counts), _typed("study", study, "trials", int, 1), study.get("output"))


def _read_json(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def bundled_config_path(name: str = "ball-d2-dirichlet-quadratic.json") -> Path:
    return Path(str(resources.files("mixres") / "configs" / name))


# ---------------------------------------------------------------- runs


@dataclass
class RunResult:
    final_loss: float
    best_loss: float
    e_opt_proxy: float
    h1_error: float
    l2_p_error: float
    relative_h1: float
    e_sta_estimate: float
    wall_time: float
    params: object = field(repr=False, default=None)
    log: list = field(repr=False, default_factory=list)

    def summary(self, include_timing: bool = True) -> dict:
        out = {k: getattr(self, k) for k in
               ("final_loss", "best_loss", "e_opt_proxy", "h1_error", "l2_p_error", "relative_h1", "e_sta_estimate")}
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def execute(run: RunConfig, log_path=None, init_seed: int | None = None) -> RunResult:
    """Train one network per ``run`` and evaluate it against the manufactured solution.

    Raises ``AssumptionError`` or ``DivergenceError`` for the caller to map.
    """
    t0 = time.perf_counter()
    prob, sol = get_problem(run.problem, alpha=run.alpha)
    require_assumptions(prob)
    seed = run.train.seed if init_seed is None else init_seed
    params0 = init_params(run.widths, run.weight_bound, seed)
    params, rep = train(prob, params0, run.activation, None, run.train, log_path=log_path, check_assumptions=False)
    src = mim.network_jet_source(params, run.activation, prob.boundary)
    err = h1_error(prob, sol, src, run.n_quad, run.eval_seed)
    norm, _ = h1_norm(prob, sol.u, run.n_quad, run.eval_seed)
    emp = mim.loss_value(prob, params, run.activation, prob.boundary, training_samples(prob, run.train))
    cont, _ = mim.continuous_loss_estimate(prob, params, run.activation, prob.boundary,
                                           max(run.n_quad, 10_000), run.eval_seed + 1)
    return RunResult(
        final_loss=rep.final_loss,
        best_loss=rep.best_loss,
        e_opt_proxy=rep.e_opt_proxy,
        h1_error=err.h1_u,
        l2_p_error=err.l2_p,
        relative_h1=err.h1_u / norm if norm > 0 else math.inf,
        e_sta_estimate=abs(cont - emp),
        wall_time=time.perf_counter() - t0,
        params=params,
        log=rep.log,
    )


def write_run(run: RunConfig, out_dir, include_timing: bool = True) -> RunResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = execute(run, log_path=out / "train_log.jsonl")
    save_checkpoint(out / "checkpoint.json", res.params, run.activation)
    (out / "report.json").write_text(json.dumps(res.summary(include_timing), indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return res


# ---------------------------------------------------------------- study

COLUMNS = ("N", "trial", "final_loss", "h1_error", "l2_p_error", "e_sta_estimate", "wall_time")
STDERR_COLUMNS = ("final_loss_stderr", "h1_error_stderr", "l2_p_error_stderr", "e_sta_estimate_stderr", "wall_time_stderr")
_VALUES = COLUMNS[2:]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


def _cell(args):
    run, n, trial, include_timing = args
    cell = run.with_batch(n, seed=run.train.seed + trial)
    res = execute(cell)
    row = {"N": n, "trial": trial, "final_loss": res.final_loss, "h1_error": res.h1_error,
           "l2_p_error": res.l2_p_error, "e_sta_estimate": res.e_sta_estimate,
           "wall_time": res.wall_time if include_timing else 0.0}
    return row, res.log


def summary_row(n: int, rows: list[dict]) -> dict:
    out = {"N": n, "trial": "mean"}
    for c, sc in zip(_VALUES, STDERR_COLUMNS):
        v = np.array([r[c] for r in rows], dtype=float)
        out[c] = math.fsum(v) / len(v)
        out[sc] = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return out


def run_study(spec: StudySpec, out=None, parallel: int = 1, include_timing: bool = True, on_row=None):
    """Train every ``(N, trial)`` cell and write the CSV table.

    Trial ``t`` uses seed ``train.seed + t`` for both the initialization and
    the sample set, the same for every ``N``. Rows are written in ``(N, trial)``
    order as soon as they (and all earlier rows) are complete; each ``N``
    is followed by its summary row. Returns the data rows and the summary rows.
    """
    cells = [(spec.run, n, t, include_timing) for n in spec.sample_counts for t in range(spec.trials)]
    fh = open(out, "w", newline="", encoding="utf-8") if isinstance(out, (str, Path)) else out
    writer = csv.writer(fh, lineterminator="\r\n") if fh is not None else None
    if writer:
        writer.writerow(COLUMNS + STDERR_COLUMNS)
        fh.flush()
    rows, summaries, logs = [], [], []

    def emit(row):
        if writer:
            writer.writerow([_fmt(row.get(c, "")) for c in COLUMNS + STDERR_COLUMNS])
            fh.flush()
        if on_row:
            on_row(row)

    def consume(result):
        row, log = result
        rows.append(row)
        logs.append(log)
        emit(row)
        if row["trial"] == spec.trials - 1:
            s = summary_row(row["N"], rows[-spec.trials:])
            summaries.append(s)
            emit(s)

    try:
        if parallel > 1:
            with ProcessPoolExecutor(max_workers=parallel) as pool:
                for result in pool.map(_cell, cells):
                    consume(result)
        else:
            for c in cells:
                consume(_cell(c))
    finally:
        if fh is not None and fh is not out:
            fh.close()
    return rows, summaries, logs


def study_csv(spec: StudySpec, **kw) -> str:
    buf = io.StringIO()
    run_study(spec, out=buf, **kw)
    return buf.getvalue()
