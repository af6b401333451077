"""Trial loops, utility metrics, budget splits and result files."""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .estimators import (
    EstimatorOutput,
    central_lap_kstar,
    central_lap_triangle,
    local_2rounds_triangle,
    local_lap_kstar,
    local_rr_triangle,
    noisy_max_degree,
)
from .graph import (
    Graph,
    clustering_coefficient,
    count_kstars,
    count_triangles,
    generate_er,
    load_edge_list,
    max_degree,
    sample_induced,
)
from .mech import PrivacyBudget, RandomSource, rr_flip_prob

ALGORITHMS = (
    "local-lap-kstar",
    "central-lap-kstar",
    "local-rr-tri",
    "local-rr-tri-noemp",
    "local-2rounds-tri",
    "central-lap-tri",
    "clustering",
)
KSTAR_ALGORITHMS = ("local-lap-kstar", "central-lap-kstar")
RR_ALGORITHMS = ("local-rr-tri", "local-rr-tri-noemp")

CSV_COLUMNS = (
    "algorithm", "n", "k", "eps0", "eps1", "eps2", "eps_edge_total", "eps_entire_total",
    "d_tilde_policy", "d_tilde_used", "trial", "truth", "estimate", "l2", "relative_error",
    "seconds",
)

# share of the budget spent on the noisy max degree when none is given
DEFAULT_PRIVATE_FRACTION = 0.1


class ConfigError(ValueError):
    pass


def l2_loss(estimate: float, truth: float) -> float:
    return (estimate - truth) ** 2


def relative_error(estimate: float, truth: float, n: int) -> float:
    """|estimate - truth| / max(truth, 0.001 n)."""
    if n < 1:
        raise ValueError("relative error needs n >= 1")
    return abs(estimate - truth) / max(truth, 0.001 * n)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an algorithm run for ``trials`` independent trials.

    ``d_tilde`` is an explicit cap (int), ``"true"`` for the exact max degree
    or ``"private"`` for the noisy max degree. ``split`` gives the fractions
    of ``eps`` for (max degree, RR round, Laplace round); one-round
    estimators receive the sum of the last two. ``fixed_sample`` keeps the
    same graph across trials instead of redrawing it.
    """

    algorithm: str
    eps: float
    split: tuple[float, float, float] | None = None
    k: int = 2
    d_tilde: int | str = "true"
    trials: int = 1
    seed: int = 0
    n: int | None = None
    input_path: str | None = None
    er: tuple[int, float] | None = None
    tight_round2_noise: bool = False
    fixed_sample: bool = False

    @property
    def d_tilde_policy(self) -> str:
        return self.d_tilde if isinstance(self.d_tilde, str) else "explicit"

    def fractions(self) -> tuple[float, float, float]:
        if self.split is not None:
            return tuple(float(f) for f in self.split)
        f0 = DEFAULT_PRIVATE_FRACTION if self.d_tilde == "private" else 0.0
        if self.algorithm in ("local-2rounds-tri", "clustering"):
            return (f0, (1 - f0) / 2, (1 - f0) / 2)
        if self.algorithm in RR_ALGORITHMS:
            return (f0, 1 - f0, 0.0)
        return (f0, 0.0, 1 - f0)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if (self.input_path is None) == (self.er is None):
            raise ConfigError("give exactly one input: a file path or an ER(n, alpha) spec")
        if self.er is not None:
            n_er, alpha = self.er
            if not 0 <= alpha <= 1 or n_er < 0:
                raise ConfigError(f"bad ER spec {self.er}")
            if self.n is not None and self.n != n_er:
                raise ConfigError("n disagrees with the ER node count")
        if isinstance(self.d_tilde, str):
            if self.d_tilde not in ("true", "private"):
                raise ConfigError(f"unknown d_tilde policy {self.d_tilde!r}")
        elif self.d_tilde < 0:
            raise ConfigError("explicit d_tilde must be non-negative")

        fr = self.fractions()
        if len(fr) != 3 or any(f < 0 for f in fr) or not math.isclose(sum(fr), 1.0, abs_tol=1e-9):
            raise ConfigError(f"split fractions must be non-negative and sum to 1, got {fr}")
        f0, f1, f2 = fr
        if self.d_tilde == "private":
            if self.algorithm in RR_ALGORITHMS:
                raise ConfigError("RR triangle counting does not use a degree cap")
            if f0 <= 0:
                raise ConfigError("the private d_tilde policy needs eps0 > 0")
        elif f0 > 0:
            raise ConfigError("eps0 > 0 is only spent by the private d_tilde policy")
        if self.algorithm in ("local-2rounds-tri", "clustering") and (f1 <= 0 or f2 <= 0):
            raise ConfigError("two-round triangle counting needs eps1 > 0 and eps2 > 0")
        if f1 + f2 <= 0:
            raise ConfigError("no budget left for the estimator")


@dataclass
class TrialReport:
    trial: int
    n: int
    estimate: float
    truth: float
    l2: float
    relative_error: float
    d_tilde_used: int | None
    budget: PrivacyBudget
    seconds: float = 0.0
    algorithm: str = ""
    k: int | None = None


@dataclass
class Summary:
    trials: int
    mean_l2: float
    mean_relative_error: float
    stddev_l2: float
    median_l2: float
    median_relative_error: float


@dataclass
class TrialRun:
    config: ExperimentConfig
    reports: list[TrialReport]
    summary: Summary
    parts: dict[str, list[TrialReport]] = field(default_factory=dict)


def summarize(reports: list[TrialReport]) -> Summary:
    l2 = [r.l2 for r in reports]
    re = [r.relative_error for r in reports]
    return Summary(
        trials=len(reports),
        mean_l2=statistics.fmean(l2),
        mean_relative_error=statistics.fmean(re),
        stddev_l2=statistics.stdev(l2) if len(l2) > 1 else 0.0,
        median_l2=statistics.median(l2),
        median_relative_error=statistics.median(re),
    )


def _trial_graph(config: ExperimentConfig, base: Graph | None, source: RandomSource, trial: int) -> Graph:
    draw = 0 if config.fixed_sample else trial
    if config.er is not None:
        n_er, alpha = config.er
        return generate_er(n_er, alpha, source.seed_for(draw, "graph"))
    if config.n is None or config.n == base.n:
        return base
    return sample_induced(base, config.n, source.seed_for(draw, "sample"))


def _report(out: EstimatorOutput, truth: float, g: Graph, trial: int, budget: PrivacyBudget,
            k: int | None) -> TrialReport:
    return TrialReport(
        trial=trial, n=g.n, estimate=out.estimate, truth=truth,
        l2=l2_loss(out.estimate, truth),
        relative_error=relative_error(out.estimate, truth, max(g.n, 1)),
        d_tilde_used=out.d_tilde, budget=budget, algorithm=out.algorithm, k=k,
    )


def run_trial(config: ExperimentConfig, trial: int, base: Graph | None,
              source: RandomSource) -> tuple[TrialReport, dict[str, TrialReport]]:
    """Run one trial; the second item holds the sub-estimates of a clustering run."""
    start = time.perf_counter()
    g = _trial_graph(config, base, source, trial)
    f0, f1, f2 = config.fractions()
    eps0, eps1, eps2 = f0 * config.eps, f1 * config.eps, f2 * config.eps
    algo = config.algorithm

    d_tilde = None
    if algo not in RR_ALGORITHMS:
        if config.d_tilde == "true":
            d_tilde = max_degree(g)
        elif config.d_tilde == "private":
            d_tilde = noisy_max_degree(g, eps0, source, trial)[1]
        else:
            d_tilde = int(config.d_tilde)
    spent0 = PrivacyBudget(eps0=eps0)
    parts: dict[str, TrialReport] = {}

    if algo == "local-lap-kstar":
        out = local_lap_kstar(g, eps1 + eps2, d_tilde, config.k, source, trial)
        rep = _report(out, count_kstars(g, config.k), g, trial, spent0 + out.budget, config.k)
    elif algo == "central-lap-kstar":
        out = central_lap_kstar(g, eps1 + eps2, d_tilde, config.k, source, trial)
        rep = _report(out, count_kstars(g, config.k), g, trial, spent0 + out.budget, config.k)
    elif algo in RR_ALGORITHMS:
        out = local_rr_triangle(g, eps1 + eps2, source, algo == "local-rr-tri", trial)
        rep = _report(out, count_triangles(g), g, trial, out.budget, None)
    elif algo == "local-2rounds-tri":
        out = local_2rounds_triangle(g, eps1, eps2, d_tilde, source, trial,
                                     tight_noise=config.tight_round2_noise)
        rep = _report(out, count_triangles(g), g, trial, spent0 + out.budget, None)
    elif algo == "central-lap-tri":
        out = central_lap_triangle(g, eps1 + eps2, d_tilde, source, trial)
        rep = _report(out, count_triangles(g), g, trial, spent0 + out.budget, None)
    else:
        tri = local_2rounds_triangle(g, eps1, eps2, d_tilde, source, trial,
                                     tight_noise=config.tight_round2_noise)
        two = local_lap_kstar(g, eps1 + eps2, d_tilde, 2, source, trial)
        true_tri, true_two = count_triangles(g), count_kstars(g, 2)
        parts["tri"] = _report(tri, true_tri, g, trial, tri.budget, None)
        parts["2star"] = _report(two, true_two, g, trial, two.budget, 2)
        cc = clustering_coefficient(tri.estimate, two.estimate)
        out = EstimatorOutput(cc, tri.budget + two.budget, 2, "clustering", d_tilde)
        rep = _report(out, clustering_coefficient(true_tri, true_two), g, trial,
                      spent0 + out.budget, 2)
    rep.seconds = time.perf_counter() - start
    return rep, parts


def _run_chunk(args):
    config, trials, base, source = args
    return [run_trial(config, t, base, source) for t in trials]


def run_trials(config: ExperimentConfig, source: RandomSource | None = None,
               workers: int = 1) -> TrialRun:
    """Run every trial of ``config``; reports come back in trial order.

    With ``workers > 1`` trials are spread over processes; since every draw is
    keyed by the trial index the results do not depend on the worker count.
    """
    config.validate()
    if source is None:
        source = RandomSource(config.seed)
    base = load_edge_list(config.input_path) if config.input_path is not None else None
    if base is not None and config.n is not None and config.n > base.n:
        raise ConfigError(f"cannot sample {config.n} users from a graph with {base.n}")

    trials = list(range(config.trials))
    if workers <= 1:
        results = _run_chunk((config, trials, base, source))
    else:
        chunks = [trials[w::workers] for w in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_chunk, [(config, c, base, source) for c in chunks]))
        results = sorted((r for chunk in done for r in chunk), key=lambda r: r[0].trial)

    reports = [r for r, _ in results]
    parts: dict[str, list[TrialReport]] = {}
    for _, p in results:
        for name, rep in p.items():
            parts.setdefault(name, []).append(rep)
    return TrialRun(config, reports, summarize(reports), parts)


def predict_bounds(algorithm: str, n: int, d_tilde: float, budget: PrivacyBudget, k: int = 2,
                   alpha: float | None = None) -> float:
    """Order-of-magnitude l2 bound with every hidden constant set to 1.

    One-round estimators read their epsilon as ``eps1 + eps2``; the two-round
    triangle bound uses eps1 for the RR terms and eps2 for the Laplace term.
    Only the growth in n, d_tilde and eps is meaningful.
    """
    eps = budget.eps1 + budget.eps2
    if algorithm == "local-lap-kstar":
        return n * d_tilde ** (2 * k - 2) / eps**2
    if algorithm == "central-lap-kstar":
        return d_tilde ** (2 * k - 2) / eps**2
    if algorithm == "central-lap-tri":
        return d_tilde**2 / eps**2
    if algorithm == "local-rr-tri":
        if alpha is None:
            raise ValueError("the RR triangle bound needs the ER density alpha")
        e = budget.eps1
        p = rr_flip_prob(e)
        beta = alpha * (1 - p) + (1 - alpha) * p
        return math.exp(6 * e) / math.expm1(e) ** 6 * beta * n**4
    if algorithm == "local-2rounds-tri":
        e1, e2 = budget.eps1, budget.eps2
        lead = math.exp(e1) / math.expm1(e1) ** 2
        return lead * (d_tilde**3 * n + math.exp(e1) / e2**2 * d_tilde**2 * n)
    raise ValueError(f"no l2 bound for {algorithm!r}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_rows(run: TrialRun, reports: list[TrialReport] | None = None, timing: bool = False):
    cfg = run.config
    for r in reports if reports is not None else run.reports:
        b = r.budget
        yield [
            r.algorithm or cfg.algorithm, r.n, _fmt(r.k), _fmt(b.eps0), _fmt(b.eps1), _fmt(b.eps2),
            _fmt(b.edge_ldp_total()), _fmt(b.entire_edge_ldp_total()), cfg.d_tilde_policy,
            _fmt(r.d_tilde_used), r.trial, _fmt(float(r.truth)), _fmt(float(r.estimate)),
            _fmt(float(r.l2)), _fmt(float(r.relative_error)),
            _fmt(r.seconds) if timing else "",
        ]


def write_csv(run: TrialRun, path, reports: list[TrialReport] | None = None,
              timing: bool = False) -> None:
    """Write one row per trial. ``seconds`` stays blank unless ``timing`` so
    that reruns with the same seed give byte-identical files."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(csv_rows(run, reports, timing))


def summary_dict(run: TrialRun) -> dict:
    cfg = run.config
    d = {"config": asdict(cfg)}
    d.update(asdict(run.summary))
    d["wall_seconds"] = sum(r.seconds for r in run.reports)
    if cfg.algorithm != "clustering" and cfg.algorithm != "local-rr-tri-noemp":
        first = run.reports[0]
        alpha = cfg.er[1] if cfg.er is not None else None
        try:
            d["l2_bound_ORDER_ONLY"] = predict_bounds(
                cfg.algorithm, first.n, first.d_tilde_used or 0, first.budget, cfg.k, alpha)
        except (ValueError, ZeroDivisionError):
            d["l2_bound_ORDER_ONLY"] = None
    for name, reps in run.parts.items():
        d[f"{name}_summary"] = asdict(summarize(reps))
    return d


def write_summary(run: TrialRun, path) -> None:
    Path(path).write_text(json.dumps(summary_dict(run), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
