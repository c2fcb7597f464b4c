"""Grid search, aggregation tables and the synthetic worked example.

The hyperparameter grid defaults to

    beta   in {1e-4, 1e-3, 1e-2, 1e-1, 1, 10}
    lambda in {0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1}
    k      in {1, 3, 5, 10, 15, 20}

with lambda pinned to 1e-3 for the methods that already sweep k or beta, so
every method searches six points.  Selection maximizes a fraction-of-
positives criterion on the validation split; test-split values are what the
rank tables aggregate.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import data as data_mod
from .data import Dataset, SplitSpec, split, synth_example
from .evaluation import criterion
from .objective import ObjectiveSpec, objective
from .solver import Model, TrainConfig, train
from .surrogate import make_loss
from .threshold import CLI_TOKENS, SURROGATE_KINDS, rule_from_token, threshold

__all__ = [
    "Grid",
    "SelectCriterion",
    "RunRecord",
    "FIXED_LAMBDA",
    "grid_points",
    "method_id",
    "grid_search",
    "zero_audit",
    "rank_table",
    "timing_probe",
    "reproduce_worked_example",
    "run_manifest",
]

FIXED_LAMBDA = 1e-3

_TOKEN_OF_KIND = {kind: token for token, kind in CLI_TOKENS.items()}


@dataclass(frozen=True)
class Grid:
    betas: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
    lambdas: tuple[float, ...] = (0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    ks: tuple[int, ...] = (1, 3, 5, 10, 15, 20)
    taus: tuple[float, ...] = (0.01, 0.03)


@dataclass(frozen=True)
class SelectCriterion:
    kind: str
    tau: float | None = None


@dataclass
class RunRecord:
    method: str
    dataset: str
    params: dict
    seed: int
    criteria: dict
    f_final: float
    f_zero: float
    ms_per_iter: float
    model: Model | None = None

    def to_dict(self) -> dict:
        doc = {
            "method": self.method,
            "dataset": self.dataset,
            "params": self.params,
            "seed": self.seed,
            "criteria": self.criteria,
            "f_final": self.f_final,
            "f_zero": self.f_zero,
            "ms_per_iter": self.ms_per_iter,
        }
        if self.model is not None:
            doc["w"] = self.model.w.tolist()
            doc["t_final"] = self.model.t_final
        return doc


def method_id(spec: ObjectiveSpec) -> str:
    """Readable method-instance label, one per (kind, tau) pair."""
    token = _TOKEN_OF_KIND[spec.rule.kind]
    if spec.rule.tau is not None:
        return f"{token}(tau={spec.rule.tau:g})"
    return token


def grid_points(template: ObjectiveSpec, grid: Grid) -> list[dict]:
    """Hyperparameter dictionaries swept for the template's method."""
    kind = template.rule.kind
    if kind == "top_push_k":
        return [{"k": k, "lambda": FIXED_LAMBDA} for k in grid.ks]
    if kind in SURROGATE_KINDS:
        return [{"beta": beta, "lambda": FIXED_LAMBDA} for beta in grid.betas]
    return [{"lambda": lam} for lam in grid.lambdas]


def _spec_at_point(template: ObjectiveSpec, point: dict) -> ObjectiveSpec:
    rule = template.rule
    if "k" in point:
        rule = dataclasses.replace(rule, k=point["k"])
    if "beta" in point:
        rule = dataclasses.replace(rule, beta=point["beta"])
    return ObjectiveSpec(rule=rule, loss=template.loss, lam=point.get("lambda", template.lam))


def _split_criteria(w, splits: dict[str, Dataset], taus) -> dict:
    out: dict[str, dict[str, float]] = {}
    for name, part in splits.items():
        values = {"positives_at_top": criterion("positives_at_top", w, part)}
        for tau in taus:
            values[f"positives_at_quantile@{tau:g}"] = criterion(
                "positives_at_quantile", w, part, tau
            )
            values[f"positives_at_np@{tau:g}"] = criterion(
                "positives_at_np", w, part, tau
            )
        out[name] = values
    return out


def _criterion_key(select: SelectCriterion) -> str:
    if select.kind == "positives_at_top":
        return select.kind
    if select.tau is None:
        raise ValueError(f"{select.kind} needs a tau")
    return f"{select.kind}@{select.tau:g}"


def _run_point(args) -> RunRecord:
    template, point, splits, cfg, taus, dataset_name = args
    spec = _spec_at_point(template, point)
    model = train(spec, splits["train"], cfg)
    zeros = np.zeros(splits["train"].m)
    return RunRecord(
        method=method_id(template),
        dataset=dataset_name,
        params=point,
        seed=cfg.seed,
        criteria=_split_criteria(model.w, splits, taus),
        f_final=objective(spec, model.w, splits["train"]),
        f_zero=objective(spec, zeros, splits["train"]),
        ms_per_iter=float(np.median(model.history.iter_ms)),
        model=model,
    )


def grid_search(
    template: ObjectiveSpec,
    grid: Grid,
    splits: tuple[Dataset, Dataset, Dataset],
    cfg: TrainConfig,
    select: SelectCriterion,
    dataset_name: str = "data",
    criteria_taus=None,
    jobs: int = 1,
) -> tuple[RunRecord, list[RunRecord]]:
    """Train one model per grid point and pick the validation winner.

    Returns (best record, all records).  The winner maximizes the selection
    criterion on the validation split; ties go to the earlier grid point, so
    the result is a pure function of the inputs.
    """
    d_train, d_valid, d_test = splits
    named = {"train": d_train, "valid": d_valid, "test": d_test}
    points = grid_points(template, grid)
    if not points:
        raise ValueError("empty hyperparameter grid")
    taus = list(criteria_taus) if criteria_taus is not None else []
    if select.tau is not None and select.tau not in taus:
        taus.append(select.tau)
    args = [(template, point, named, cfg, taus, dataset_name) for point in points]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_point, args))
    else:
        records = [_run_point(a) for a in args]
    key = _criterion_key(select)
    best = max(records, key=lambda r: r.criteria["valid"][key])
    return best, records


def zero_audit(records: list[RunRecord]) -> list[dict]:
    """Per method and dataset: did training beat the all-zero weights?

    A grid point counts as a success when f(w_final) < f(0) strictly.  The
    outcome column reads "all", "none", or a condition on the swept
    hyperparameter such as "beta <= 0.1".
    """
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.dataset), []).append(rec)
    rows = []
    for (method, dataset), recs in sorted(groups.items()):
        successes = [r for r in recs if r.f_final < r.f_zero]
        if len(successes) == len(recs):
            outcome = "all"
        elif not successes:
            outcome = "none"
        else:
            outcome = _describe_successes(recs, successes)
        rows.append(
            {
                "method": method,
                "dataset": dataset,
                "outcome": outcome,
                "n_success": len(successes),
                "n_points": len(recs),
            }
        )
    return rows


def _describe_successes(recs: list[RunRecord], successes: list[RunRecord]) -> str:
    swept = [
        name
        for name in ("beta", "k", "lambda")
        if len({r.params.get(name) for r in recs}) > 1
    ]
    if not swept:
        return "some"
    name = swept[0]
    good = sorted(r.params[name] for r in successes)
    all_vals = sorted(r.params[name] for r in recs)
    if len(good) == 1:
        return f"{name} = {good[0]:g}"
    if good == [v for v in all_vals if v <= good[-1]]:
        return f"{name} <= {good[-1]:g}"
    if good == [v for v in all_vals if v >= good[0]]:
        return f"{name} >= {good[0]:g}"
    return f"{name} in {{{', '.join(f'{v:g}' for v in good)}}}"


def rank_table(
    winners: list[RunRecord], criteria: list[str], split_name: str = "test"
) -> dict[str, dict[str, float]]:
    """Average rank of each method across datasets, per criterion column.

    Rank 1 is the best (largest criterion value); ties share the average of
    the ranks they span.  Every method must appear on every dataset.
    """
    methods = sorted({r.method for r in winners})
    datasets = sorted({r.dataset for r in winners})
    by_cell = {(r.method, r.dataset): r for r in winners}
    table: dict[str, dict[str, float]] = {}
    for crit in criteria:
        ranks = np.zeros(len(methods))
        for ds in datasets:
            values = []
            for method in methods:
                rec = by_cell.get((method, ds))
                if rec is None:
                    raise ValueError(f"missing cell: method {method!r} on {ds!r}")
                values.append(rec.criteria[split_name][crit])
            ranks += rankdata([-v for v in values], method="average")
        table[crit] = {m: ranks[i] / len(datasets) for i, m in enumerate(methods)}
    return table


def timing_probe(
    spec: ObjectiveSpec, d: Dataset, cfg: TrainConfig, warmup: int = 5, timed: int = 21
) -> float:
    """Median wall-clock milliseconds per training iteration after warmup."""
    if warmup < 1:
        raise ValueError("warmup must be >= 1")
    probe_cfg = dataclasses.replace(cfg, iterations=warmup + timed)
    model = train(spec, d, probe_cfg)
    return float(statistics.median(model.history.iter_ms[warmup:]))


_WORKED_EXAMPLE_METHODS = ("toppush", "toppushk", "grill", "patmat", "topmean")


def reproduce_worked_example(
    n: int = 100_000,
    tau: float = 0.05,
    beta: float = 0.01,
    k: int = 5,
    seed: int = 0,
    methods=_WORKED_EXAMPLE_METHODS,
) -> list[dict]:
    """Thresholds and objectives of the two landmark weight vectors.

    On the planted outlier dataset the all-zero weights w1=(0,0) and the
    perfect separator w2=(1,0) have closed-form thresholds and objectives
    for each method; the table pairs the measured sample values with those
    limits.  The closed form for patmat's w2 assumes beta <= tau.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000 for the limits to be meaningful")
    d = synth_example(n, seed)
    w1 = np.zeros(2)
    w2 = np.array([1.0, 0.0])
    t0 = (1.0 - tau) / beta
    expected = {
        "toppush": {"w1": (0.0, 1.0), "w2": (2.0, 2.5)},
        "toppushk": {"w1": (0.0, 1.0), "w2": (2.0 / k, 0.5 + 2.0 / k)},
        "grill": {
            "w1": (0.0, 2.0),
            "w2": (1.0 - 2.0 * tau, 1.5 - 2.0 * tau * (1.0 - tau)),
        },
        "patmat": {"w1": (t0, 1.0 + t0), "w2": (t0, 0.5 + t0)},
        "topmean": {"w1": (0.0, 1.0), "w2": (1.0 - tau, 1.5 - tau)},
    }
    rows = []
    for token in methods:
        spec = ObjectiveSpec(rule=rule_from_token(token, k=k, tau=tau, beta=beta))
        for point_name, w in (("w1", w1), ("w2", w2)):
            t_meas = threshold(spec.rule, w, d, spec.loss).t
            f_meas = objective(spec, w, d)
            t_exp, f_exp = expected[token][point_name]
            rows.append(
                {
                    "method": token,
                    "point": point_name,
                    "t": t_meas,
                    "t_expected": t_exp,
                    "f": f_meas,
                    "f_expected": f_exp,
                }
            )
    return rows


def _load_manifest_dataset(entry: dict) -> Dataset:
    kind = entry.get("format", "csv")
    if kind == "synth":
        return synth_example(entry["n"], entry.get("seed", 0))
    if kind == "csv":
        return data_mod.load_csv(entry["path"], entry["label"], entry["pos"])
    if kind == "libsvm":
        return data_mod.load_libsvm(entry["path"])
    raise ValueError(f"unknown dataset format {kind!r}")


def run_manifest(manifest: dict, out_dir, jobs: int = 1) -> dict:
    """Execute a JSON experiment manifest and write its artifact files.

    The manifest lists datasets, method instances, grid overrides, the train
    configuration, split fractions and the selection criterion.  Outputs in
    ``out_dir``: run_records.json, rank_table.csv, zero_audit.csv and
    timing.csv.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(**manifest.get("grid", {}))
    cfg = TrainConfig.from_dict(manifest.get("train", {}))
    split_doc = manifest.get("split", {})
    spec_split = SplitSpec(
        train_frac=split_doc.get("train_frac", 0.5),
        valid_frac=split_doc.get("valid_frac", 0.25),
        test_frac=split_doc.get("test_frac", 0.25),
        seed=split_doc.get("seed", 0),
        stratified=split_doc.get("stratified", True),
    )
    select_doc = manifest["select"]
    select = SelectCriterion(kind=select_doc["criterion"], tau=select_doc.get("tau"))
    loss = make_loss(manifest.get("loss", "hinge"))
    criteria_taus = manifest.get("criteria_taus", list(grid.taus))

    winners: list[RunRecord] = []
    all_records: list[RunRecord] = []
    timing_rows: list[dict] = []
    for ds_entry in manifest["datasets"]:
        name = ds_entry["name"]
        splits = split(_load_manifest_dataset(ds_entry), spec_split)
        for m_entry in manifest["methods"]:
            template = ObjectiveSpec(
                rule=rule_from_token(
                    m_entry["method"],
                    k=m_entry.get("k", 1),
                    tau=m_entry.get("tau"),
                    beta=m_entry.get("beta", 1.0),
                ),
                loss=loss,
            )
            best, records = grid_search(
                template,
                grid,
                splits,
                cfg,
                select,
                dataset_name=name,
                criteria_taus=criteria_taus,
                jobs=jobs,
            )
            winners.append(best)
            all_records.extend(records)
            timing_rows.append(
                {
                    "method": best.method,
                    "dataset": name,
                    "ms_per_iter": best.ms_per_iter,
                }
            )

    (out / "run_records.json").write_text(
        json.dumps([r.to_dict() for r in all_records], indent=2)
    )
    criteria_keys = sorted(winners[0].criteria["test"]) if winners else []
    ranks = rank_table(winners, criteria_keys)
    _write_rank_csv(ranks, out / "rank_table.csv")
    _write_rows_csv(
        zero_audit(all_records),
        out / "zero_audit.csv",
        ["method", "dataset", "outcome", "n_success", "n_points"],
    )
    _write_rows_csv(timing_rows, out / "timing.csv", ["method", "dataset", "ms_per_iter"])
    return {
        "winners": winners,
        "records": all_records,
        "rank_table": ranks,
    }


def _write_rank_csv(ranks: dict[str, dict[str, float]], path: Path) -> None:
    criteria = list(ranks)
    methods = sorted({m for col in ranks.values() for m in col})
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method"] + criteria)
        for m in methods:
            writer.writerow([m] + [f"{ranks[c][m]:.2f}" for c in criteria])


def _write_rows_csv(rows: list[dict], path: Path, columns: list[str]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])
