"""Experiment orchestration: attack/denoise/train pipelines and sweeps.

Every repetition derives its own seeds from the base seed and the repetition
index, then runs three arms on the same split with the same classifier init:
``clean`` (original graph), ``poisoned`` (attacked graph) and ``denoised``
(Stage 1 output of the attacked graph).  ``sweep`` keeps those seeds fixed
across parameter values so the resulting curves are paired.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attacks import heterophilic_add, perturbation_report, random_add
from .datasets import Dataset, SbmParams, Split, generate_sbm, load_bundle, load_splits, split_nodes
from .denoise import DenoiseConfig, denoise, pairwise_p_distances
from .gcn import TrainConfig, normalize_adjacency, train
from .operators import WeightVector, adjacency_from_weights, laplacian_from_weights
from .rng import derive_seed

__all__ = [
    "AttackSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "PipelineStageError",
    "ARMS",
    "run_pipeline",
    "sweep",
    "write_report_json",
    "write_report_csv",
]

ARMS = ("clean", "poisoned", "denoised")

# stream ids for per-repetition seed derivation
_DATASET, _SPLIT, _ATTACK, _DENOISE, _TRAIN = range(1, 6)

SWEEPABLE = ("rate", "beta", "p")


class PipelineStageError(RuntimeError):
    """Wraps a failure with the stage name and repetition index."""

    def __init__(self, stage: str, repetition: int, cause: Exception):
        super().__init__(f"repetition {repetition}, stage {stage}: {cause}")
        self.stage = stage
        self.repetition = repetition
        self.__cause__ = cause


@dataclass(frozen=True)
class AttackSpec:
    """Poisoning applied to each repetition's graph.

    ``random`` adds floor(rate * |E|) edges.  ``heterophilic`` adds ``budget``
    cross-label edges, or floor(rate * |E|) of them when budget == 0, so
    intensity can be stated relative to the clean edge count.
    """

    kind: str = "none"
    rate: float = 0.0
    budget: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "random", "heterophilic"):
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.rate < 0:
            raise ValueError(f"rate must be >= 0, got {self.rate}")
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0, got {self.budget}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rate": self.rate, "budget": self.budget}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a pipeline run needs; exactly one dataset source is set."""

    bundle: str | None = None
    sbm: SbmParams | None = None
    attack: AttackSpec = field(default_factory=AttackSpec)
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    fractions: tuple = (0.8, 0.1, 0.1)
    repetitions: int = 10
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if (self.bundle is None) == (self.sbm is None):
            raise ValueError("exactly one of bundle or sbm must be set")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if len(self.fractions) != 3:
            raise ValueError("fractions must be (train, val, test)")

    def to_dict(self) -> dict:
        # `out` is orchestration, not part of the experiment definition, so
        # the echoed config stays byte-identical wherever the report lands
        return {
            "bundle": self.bundle,
            "sbm": None if self.sbm is None else self.sbm.to_dict(),
            "attack": self.attack.to_dict(),
            "denoise": self.denoise.to_dict(),
            "train": self.train.to_dict(),
            "fractions": list(self.fractions),
            "repetitions": self.repetitions,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        """Rebuild a config from a report echo, so runs are reproducible."""
        sbm = payload.get("sbm")
        return cls(
            bundle=payload.get("bundle"),
            sbm=None if sbm is None else SbmParams(**sbm),
            attack=AttackSpec(**payload["attack"]),
            denoise=DenoiseConfig(**payload["denoise"]),
            train=TrainConfig(**payload["train"]),
            fractions=tuple(payload["fractions"]),
            repetitions=payload["repetitions"],
            seed=payload["seed"],
        )


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    repetitions: list
    aggregates: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "repetitions": self.repetitions,
            "aggregates": self.aggregates,
        }


def _aggregate(records: list, arms=ARMS) -> dict:
    out = {}
    for arm in arms:
        values = np.array([r["accuracy"][arm] for r in records], dtype=np.float64)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        out[arm] = {"mean": float(values.mean()), "std": std}
    return out


def _apply_attack(dataset: Dataset, attack: AttackSpec, seed: int) -> WeightVector:
    if attack.kind == "none":
        return dataset.graph
    if attack.kind == "random":
        return random_add(dataset.graph, attack.rate, seed)
    budget = attack.budget
    if budget == 0:
        budget = int(attack.rate * dataset.graph.edge_count + 1e-9)
    return heterophilic_add(dataset, budget, seed)


def _stage(stage: str, repetition: int, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise PipelineStageError(stage, repetition, exc) from exc


def run_repetition(config: ExperimentConfig, r: int,
                   bundle_dataset: Dataset | None = None,
                   bundle_split: Split | None = None,
                   shared_d_p: np.ndarray | None = None) -> dict:
    """One repetition: build data, poison, run the three arms, record results."""
    rep_seed = derive_seed(config.seed, r)

    if config.sbm is not None:
        dataset = _stage("dataset", r, generate_sbm, config.sbm,
                         derive_seed(rep_seed, _DATASET))
    else:
        if bundle_dataset is None:
            bundle_dataset = _stage("dataset", r, load_bundle, config.bundle)
            bundle_split = load_splits(config.bundle, bundle_dataset.n)
        dataset = bundle_dataset

    if bundle_split is not None:
        split = bundle_split
    else:
        split = _stage("split", r, split_nodes, dataset.n, config.fractions,
                       derive_seed(rep_seed, _SPLIT))

    poisoned = _stage("attack", r, _apply_attack, dataset, config.attack,
                      derive_seed(rep_seed, _ATTACK))
    attack_stats = perturbation_report(dataset.graph, poisoned, dataset,
                                       p=config.denoise.p)

    d_p = shared_d_p
    if d_p is None and config.denoise.beta != 0.0:
        d_p = _stage("distances", r, pairwise_p_distances, dataset.features,
                     config.denoise.p)
    denoise_cfg = dataclasses.replace(config.denoise,
                                      seed=derive_seed(rep_seed, _DENOISE))
    result = _stage("denoise", r, denoise, laplacian_from_weights(poisoned),
                    dataset.features, denoise_cfg, d_p=d_p)

    train_cfg = dataclasses.replace(config.train, seed=derive_seed(rep_seed, _TRAIN))
    accuracies = {}
    for arm, weights in (("clean", dataset.graph), ("poisoned", poisoned),
                         ("denoised", result.weights)):
        a_hat = normalize_adjacency(adjacency_from_weights(weights))
        _, report = _stage(f"train[{arm}]", r, train, dataset, a_hat, split, train_cfg)
        accuracies[arm] = report.test_accuracy

    clean_edges = dataset.graph.edge_count
    return {
        "repetition": r,
        "seed": rep_seed,
        "attack": {
            **attack_stats.to_dict(),
            "added_fraction_of_clean": (
                attack_stats.edges_added / clean_edges if clean_edges else 0.0
            ),
        },
        "denoise": {
            "iterations": result.iterations_run,
            "converged": result.converged,
            "final_objective": float(result.objective_trace[-1]),
        },
        "accuracy": accuracies,
    }


def run_pipeline(config: ExperimentConfig) -> ExperimentReport:
    """Run all repetitions and aggregate mean +- sample std per arm."""
    bundle_dataset = None
    bundle_split = None
    shared_d_p = None
    if config.bundle is not None:
        bundle_dataset = load_bundle(config.bundle)
        bundle_split = load_splits(config.bundle, bundle_dataset.n)
        if config.denoise.beta != 0.0:
            shared_d_p = pairwise_p_distances(bundle_dataset.features, config.denoise.p)

    records = [
        run_repetition(config, r, bundle_dataset, bundle_split, shared_d_p)
        for r in range(config.repetitions)
    ]
    report = ExperimentReport(
        config=config.to_dict(),
        repetitions=records,
        aggregates=_aggregate(records),
    )
    if config.out:
        write_report_json(report, config.out)
    return report


def sweep(config: ExperimentConfig, parameter: str, values) -> list[ExperimentReport]:
    """One report per value with unchanged seeds, so curves are paired."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"parameter must be one of {SWEEPABLE}, got {parameter!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    reports = []
    for value in values:
        # per-value runs never write config.out; the caller owns the list
        cfg = dataclasses.replace(config, out=None)
        if parameter == "rate":
            cfg = dataclasses.replace(cfg,
                                      attack=dataclasses.replace(cfg.attack, rate=float(value)))
        elif parameter == "beta":
            cfg = dataclasses.replace(cfg,
                                      denoise=dataclasses.replace(cfg.denoise, beta=float(value)))
        else:
            cfg = dataclasses.replace(cfg,
                                      denoise=dataclasses.replace(cfg.denoise, p=float(value)))
        reports.append(run_pipeline(cfg))
    return reports


def report_json_text(report) -> str:
    """Stable JSON rendering for a report or a list of reports."""
    if isinstance(report, list):
        payload = [r.to_json_dict() for r in report]
    else:
        payload = report.to_json_dict()
    return json.dumps(payload, indent=2) + "\n"


def write_report_json(report, path) -> None:
    Path(path).write_text(report_json_text(report), encoding="utf-8")


def write_report_csv(report, path) -> None:
    """One row per (arm, repetition) for external plotting tools."""
    reports = report if isinstance(report, list) else [report]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["report", "arm", "repetition", "seed", "test_accuracy"])
        for idx, rep in enumerate(reports):
            for record in rep.repetitions:
                for arm in ARMS:
                    writer.writerow([
                        idx, arm, record["repetition"], record["seed"],
                        repr(record["accuracy"][arm]),
                    ])
