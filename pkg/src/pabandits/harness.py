"""Experiment configuration, seed fan-out, CSV persistence and SVG plots."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import APPROXIMATE_BASELINE_LABEL, eps_greedy_run, oracle_ucb_run
from .cipa import regret_curve_ctx, run_cipa
from .env import TABLE3, ContextualInstance, MabInstance, instance_from_dict, load_instance
from .errors import ConfigError, InstanceError
from .ipa import regret_curve, run_ipa

MAB_ALGORITHMS = ("ipa+ucb", "ipa+eps-greedy", "oracle-ucb", "eps-greedy")
CONTEXTUAL_ALGORITHMS = ("cipa",)
ALGORITHMS = MAB_ALGORITHMS + CONTEXTUAL_ALGORITHMS
# part of every run's seed, so algorithms never share random streams by accident
ALGORITHM_CODES = {name: i for i, name in enumerate(ALGORITHMS)}
DISPLAY_NAMES = {"eps-greedy": APPROXIMATE_BASELINE_LABEL}


@dataclass
class ExperimentConfig:
    setting: str
    instance: MabInstance | ContextualInstance
    T: int
    seed_count: int = 1
    base_seed: int = 0
    algorithms: list[str] = field(default_factory=lambda: ["ipa+ucb"])
    output_dir: Path = Path("results")
    plot: bool = True
    eps_m: float = 500
    eps_alpha: float = 1.0
    stride: int = 1
    trajectories: bool = False

    def __post_init__(self):
        if self.setting not in ("mab", "contextual"):
            raise ConfigError(f"setting: expected 'mab' or 'contextual', got {self.setting!r}")
        if not isinstance(self.T, int) or isinstance(self.T, bool) or self.T < 2:
            raise ConfigError(f"T: must be an integer >= 2, got {self.T!r}")
        if not isinstance(self.seed_count, int) or self.seed_count < 1:
            raise ConfigError(f"seeds.count: must be an integer >= 1, got {self.seed_count!r}")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ConfigError(f"seeds.base: must be a nonnegative integer, got {self.base_seed!r}")
        if not self.algorithms:
            raise ConfigError("algorithms: list must be nonempty")
        allowed = MAB_ALGORITHMS if self.setting == "mab" else CONTEXTUAL_ALGORITHMS
        for name in self.algorithms:
            if name not in allowed:
                raise ConfigError(f"algorithms: {name!r} is not available for setting {self.setting!r} (choose from {list(allowed)})")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("algorithms: duplicate entries")
        want = MabInstance if self.setting == "mab" else ContextualInstance
        if not isinstance(self.instance, want):
            raise ConfigError(f"instance: a {self.setting} experiment needs a {want.__name__}")
        if not isinstance(self.stride, int) or self.stride < 1:
            raise ConfigError(f"stride: must be a positive integer, got {self.stride!r}")
        if self.eps_m < 1 or self.eps_alpha <= 0:
            raise ConfigError("eps_greedy: needs m >= 1 and alpha > 0")
        self.output_dir = Path(self.output_dir)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {"setting", "instance", "T", "seeds", "algorithms", "output_dir", "plot", "eps_greedy", "stride", "subroutine", "trajectories"}
        extra = sorted(set(doc) - known)
        if extra:
            raise ConfigError(f"unknown config keys: {extra}")
        for key in ("setting", "instance", "T"):
            if key not in doc:
                raise ConfigError(f"{key}: missing field")
        base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        inst = _resolve_instance(doc["instance"], base_dir)
        seeds = doc.get("seeds", {})
        if not isinstance(seeds, dict):
            raise ConfigError("seeds: expected an object {count, base}")
        eps = doc.get("eps_greedy", {})
        if not isinstance(eps, dict):
            raise ConfigError("eps_greedy: expected an object {m, alpha}")
        algos = doc.get("algorithms", ["cipa"] if doc["setting"] == "contextual" else ["ipa+ucb"])
        if not isinstance(algos, list):
            raise ConfigError("algorithms: expected a list")
        if "subroutine" in doc:
            algos = with_subroutine(algos, doc["subroutine"])
        out = Path(doc.get("output_dir", "results"))
        if not out.is_absolute():
            out = base_dir / out
        return cls(
            setting=doc["setting"],
            instance=inst,
            T=doc["T"],
            seed_count=seeds.get("count", 1),
            base_seed=seeds.get("base", 0),
            algorithms=list(algos),
            output_dir=out,
            plot=bool(doc.get("plot", True)),
            eps_m=eps.get("m", 500),
            eps_alpha=eps.get("alpha", 1.0),
            stride=doc.get("stride", 1),
            trajectories=bool(doc.get("trajectories", False)),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        try:
            return cls.from_dict(doc, base_dir=path.parent)
        except InstanceError as exc:
            raise ConfigError(f"{path}: instance: {exc}") from None


def _resolve_instance(source, base_dir: Path):
    if source == "table3":
        return TABLE3
    if isinstance(source, dict):
        return instance_from_dict(source)
    if isinstance(source, str):
        p = Path(source)
        return load_instance(p if p.is_absolute() else base_dir / p)
    raise ConfigError("instance: expected 'table3', an inline object, or a file path")


def with_subroutine(algorithms: list[str], subroutine: str) -> list[str]:
    """Replace every ``ipa+...`` entry by ``ipa+<subroutine>``."""
    if subroutine not in ("ucb", "eps-greedy"):
        raise ConfigError(f"subroutine: expected 'ucb' or 'eps-greedy', got {subroutine!r}")
    out = []
    for name in algorithms:
        name = f"ipa+{subroutine}" if isinstance(name, str) and name.startswith("ipa+") else name
        if name not in out:
            out.append(name)
    return out


def figure1_config(output_dir="figure1") -> ExperimentConfig:
    """TABLE3 instance, T = 10^4, 100 seeds, IPA+UCB vs oracle UCB vs eps-greedy."""
    return ExperimentConfig(
        setting="mab",
        instance=TABLE3,
        T=10_000,
        seed_count=100,
        base_seed=0,
        algorithms=["ipa+ucb", "oracle-ucb", "eps-greedy"],
        output_dir=Path(output_dir),
        plot=True,
        stride=10,
    )


PRESETS = {"figure1": figure1_config}


# ---------------------------------------------------------------------------
# running


def run_seed(cfg: ExperimentConfig, algorithm: str, index: int):
    """Run one algorithm on seed ``index``; returns ``(trajectory, regret curve)``."""
    seed = [cfg.base_seed, index, ALGORITHM_CODES[algorithm]]
    inst = cfg.instance
    if algorithm == "ipa+ucb":
        traj = run_ipa(inst, "ucb", cfg.T, seed)
    elif algorithm == "ipa+eps-greedy":
        traj = run_ipa(inst, "eps-greedy", cfg.T, seed, eps_params={"m": cfg.eps_m, "alpha": cfg.eps_alpha})
    elif algorithm == "oracle-ucb":
        traj = oracle_ucb_run(inst, cfg.T, seed)
    elif algorithm == "eps-greedy":
        traj = eps_greedy_run(inst, cfg.T, seed, m=cfg.eps_m, alpha=cfg.eps_alpha)
    elif algorithm == "cipa":
        traj = run_cipa(inst, cfg.T, seed)
        return traj, regret_curve_ctx(traj, inst)
    else:  # pragma: no cover - validated by the config
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    return traj, regret_curve(traj, inst)


def _task(args):
    cfg, algorithm, index = args
    traj, curve = run_seed(cfg, algorithm, index)
    return (traj if cfg.trajectories and index == 0 else None), curve


def worker_count() -> int:
    raw = os.environ.get("PABANDITS_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PABANDITS_WORKERS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"PABANDITS_WORKERS must be a positive integer, got {raw!r}")
    return n


def _fmt(x: float) -> str:
    return repr(float(x))


def summarize(curves: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over seeds (rows); stderr is 0 for one seed."""
    mean = curves.mean(axis=0)
    n = curves.shape[0]
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, curves.std(axis=0, ddof=1) / math.sqrt(n)


def slug(algorithm: str) -> str:
    return algorithm.replace("+", "_")


def run_experiment(cfg: ExperimentConfig) -> dict[str, Path]:
    """Run every (algorithm, seed) pair and write CSVs (and the plot).

    Returns the written paths keyed by ``"<algorithm>"``, ``"summary"`` and
    ``"plot"``.
    """
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output_dir {str(out)!r} is not writable ({exc.strerror})") from None

    tasks = [(cfg, a, i) for a in cfg.algorithms for i in range(cfg.seed_count)]
    n_workers = min(worker_count(), len(tasks))
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]

    rows = np.arange(cfg.stride - 1, cfg.T, cfg.stride)
    if rows.size == 0 or rows[-1] != cfg.T - 1:
        rows = np.append(rows, cfg.T - 1)
    paths: dict[str, Path] = {}
    summary: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for k, algo in enumerate(cfg.algorithms):
        chunk = results[k * cfg.seed_count:(k + 1) * cfg.seed_count]
        curves = np.array([c[rows] for _, c in chunk])
        p = out / f"{slug(algo)}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "t", "cum_regret"])
            for i, curve in enumerate(curves):
                for t, v in zip(rows + 1, curve):
                    w.writerow([i, int(t), _fmt(v)])
        paths[algo] = p
        summary[algo] = summarize(curves)
        traj = chunk[0][0]
        if traj is not None:
            tp = out / f"{slug(algo)}_trajectory_seed0.csv"
            traj.to_csv(tp, cfg.instance)
            paths[f"{algo}:trajectory"] = tp

    sp = out / "summary.csv"
    with sp.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["t"]
        for algo in cfg.algorithms:
            header += [f"{algo}_mean", f"{algo}_stderr"]
        w.writerow(header)
        for r, t in enumerate(rows + 1):
            line = [int(t)]
            for algo in cfg.algorithms:
                mean, se = summary[algo]
                line += [_fmt(mean[r]), _fmt(se[r])]
            w.writerow(line)
    paths["summary"] = sp
    (out / "config.json").write_text(json.dumps(_config_record(cfg), indent=2, sort_keys=True) + "\n")
    if cfg.plot:
        paths["plot"] = emit_plot(sp, out / "regret.svg")
    return paths


def _config_record(cfg: ExperimentConfig) -> dict:
    return {
        "setting": cfg.setting,
        "instance": cfg.instance.to_dict(),
        "T": cfg.T,
        "seeds": {"count": cfg.seed_count, "base": cfg.base_seed},
        "algorithms": list(cfg.algorithms),
        "eps_greedy": {"m": cfg.eps_m, "alpha": cfg.eps_alpha},
        "stride": cfg.stride,
    }


# ---------------------------------------------------------------------------
# plotting


def read_summary(path) -> tuple[np.ndarray, dict[str, tuple[np.ndarray, np.ndarray]]]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InstanceError(f"{path}: cannot read summary ({exc.strerror})") from None
    if not rows:
        raise InstanceError(f"{path}: empty summary file")
    header, body = rows[0], rows[1:]
    if not header or header[0] != "t":
        raise InstanceError(f"{path}: first column must be 't'")
    algos = [h[: -len("_mean")] for h in header[1:] if h.endswith("_mean")]
    if not algos:
        raise InstanceError(f"{path}: no '<algorithm>_mean' columns")
    if not body:
        raise InstanceError(f"{path}: summary has no data rows")
    col = {h: i for i, h in enumerate(header)}
    try:
        data = np.array([[float(x) for x in r] for r in body])
    except ValueError as exc:
        raise InstanceError(f"{path}: non-numeric entry ({exc})") from None
    series = {}
    for a in algos:
        se_col = col.get(f"{a}_stderr")
        se = data[:, se_col] if se_col is not None else np.zeros(len(body))
        series[a] = (data[:, col[f"{a}_mean"]], se)
    return data[:, 0], series


def emit_plot(summary_csv, out_svg) -> Path:
    """Mean cumulative regret with a +-1 stderr band per algorithm, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t, series = read_summary(summary_csv)
    out_svg = Path(out_svg)
    with matplotlib.rc_context({"svg.hashsalt": "pabandits", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for name, (mean, se) in series.items():
            (line,) = ax.plot(t, mean, label=DISPLAY_NAMES.get(name, name), linewidth=1.5)
            line.set_gid(f"mean-{slug(name)}")
            band = ax.fill_between(t, mean - se, mean + se, alpha=0.25, color=line.get_color(), linewidth=0)
            band.set_gid(f"band-{slug(name)}")
        ax.set_xlabel("t")
        ax.set_ylabel("cumulative regret")
        ax.legend(loc="upper left")
        ax.grid(alpha=0.3)
        fig.tight_layout()
        try:
            fig.savefig(out_svg, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise ConfigError(f"cannot write plot {str(out_svg)!r} ({exc.strerror})") from None
        finally:
            plt.close(fig)
    return out_svg


__all__ = [
    "ALGORITHMS",
    "ExperimentConfig",
    "PRESETS",
    "emit_plot",
    "figure1_config",
    "read_summary",
    "run_experiment",
    "run_seed",
    "summarize",
    "with_subroutine",
]
