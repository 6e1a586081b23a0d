"""Synthetic event streams from a planted label-interaction graph.

Labels follow a noisy-OR law with one-step memory: label c fires at step t
with probability 1 - (1 - base_c) * prod over active parents (1 - p_edge).
An edge can be amount-gated: it applies `p` only when the parent's amount at
t-1 exceeds the gate, and `p_low` otherwise.  Every event is guaranteed at
least one label by resampling the whole label vector, which biases empirical
marginals upward relative to the unconditioned law; `bayes_optimal_scores`
deliberately returns the unconditioned probabilities (the quantity the graph
defines and the quantity a predictor is scored against).
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import EventRecord, WindowSample
from .errors import ConfigError

_MAX_RESAMPLES = 10_000


@dataclass(frozen=True)
class Edge:
    parent: int
    child: int
    p: float
    amount_gate: float | None = None  # parent amount must exceed this for p to apply
    p_low: float = 0.0  # edge probability when the gate is not exceeded

    def effective_p(self, parent_amount: float) -> float:
        if self.amount_gate is None:
            return self.p
        return self.p if parent_amount > self.amount_gate else self.p_low


@dataclass
class PlantedGraph:
    n_labels: int
    edges: tuple[Edge, ...]
    base_rates: np.ndarray  # (K,)
    amount_mu: np.ndarray | None = None  # lognormal location per label; default 0
    amount_sigma: np.ndarray | None = None  # lognormal scale per label; default 0.25
    dt_p: float = 0.5  # geometric day-gap parameter

    def __post_init__(self):
        self.edges = tuple(self.edges)
        self.base_rates = np.asarray(self.base_rates, dtype=np.float64)
        k = self.n_labels
        if self.amount_mu is None:
            self.amount_mu = np.zeros(k)
        if self.amount_sigma is None:
            self.amount_sigma = np.full(k, 0.25)
        self.amount_mu = np.asarray(self.amount_mu, dtype=np.float64)
        self.amount_sigma = np.asarray(self.amount_sigma, dtype=np.float64)

    @property
    def label_names(self) -> tuple[str, ...]:
        return tuple(f"L{c:02d}" for c in range(self.n_labels))

    def validate(self) -> None:
        k = self.n_labels
        if k < 2:
            raise ConfigError(f"graph needs at least 2 labels, got {k}")
        for name, arr in (("base_rates", self.base_rates), ("amount_mu", self.amount_mu),
                          ("amount_sigma", self.amount_sigma)):
            if arr.shape != (k,):
                raise ConfigError(f"{name} must have shape ({k},), got {arr.shape}")
        if np.any((self.base_rates < 0) | (self.base_rates > 1)):
            raise ConfigError("base rates must lie in [0, 1]")
        if not 0.0 < self.dt_p <= 1.0:
            raise ConfigError(f"dt_p must be in (0, 1], got {self.dt_p}")
        for e in self.edges:
            if not (0 <= e.parent < k and 0 <= e.child < k):
                raise ConfigError(f"edge {e.parent}->{e.child} references a missing label")
            if not (0.0 <= e.p <= 1.0 and 0.0 <= e.p_low <= 1.0):
                raise ConfigError(f"edge {e.parent}->{e.child} has probability outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_labels": self.n_labels,
                "base_rates": self.base_rates.tolist(),
                "amount_mu": self.amount_mu.tolist(),
                "amount_sigma": self.amount_sigma.tolist(),
                "dt_p": self.dt_p,
                "edges": [
                    {
                        "parent": e.parent,
                        "child": e.child,
                        "p": e.p,
                        "amount_gate": e.amount_gate,
                        "p_low": e.p_low,
                    }
                    for e in self.edges
                ],
            },
            sort_keys=True,
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "PlantedGraph":
        try:
            raw = json.loads(text)
            graph = cls(
                n_labels=raw["n_labels"],
                edges=tuple(Edge(**e) for e in raw["edges"]),
                base_rates=np.array(raw["base_rates"]),
                amount_mu=np.array(raw["amount_mu"]) if "amount_mu" in raw else None,
                amount_sigma=np.array(raw["amount_sigma"]) if "amount_sigma" in raw else None,
                dt_p=raw.get("dt_p", 0.5),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed graph spec: {exc}") from exc
        graph.validate()
        return graph


def next_label_probs(
    graph: PlantedGraph,
    prev_labels: np.ndarray | None,
    prev_amounts: np.ndarray | None = None,
) -> np.ndarray:
    """Exact per-label firing probabilities for the next event.

    `prev_labels` is the previous event's (K,) indicator, or None at a
    sequence start; `prev_amounts` holds the previous amounts (0 at absent
    labels) and only matters for amount-gated edges.
    """
    probs = graph.base_rates.copy()
    if prev_labels is None:
        return probs
    amounts = np.zeros(graph.n_labels) if prev_amounts is None else prev_amounts
    keep = np.ones(graph.n_labels)
    touched = np.zeros(graph.n_labels, dtype=bool)
    for e in graph.edges:
        if prev_labels[e.parent]:
            keep[e.child] *= 1.0 - e.effective_p(amounts[e.parent])
            touched[e.child] = True
    # labels with no active parent keep their base rate exactly
    probs[touched] = 1.0 - (1.0 - graph.base_rates[touched]) * keep[touched]
    return probs


def generate(
    graph: PlantedGraph,
    n_ids: int,
    events_per_id: int,
    seed: int,
    start_date: dt.date = dt.date(2016, 1, 1),
) -> list[EventRecord]:
    """Event streams for `n_ids` sequences, each spawned from its own seed."""
    graph.validate()
    if n_ids < 1:
        raise ConfigError(f"n_ids must be >= 1, got {n_ids}")
    if events_per_id < 2:
        raise ConfigError(f"events_per_id must be >= 2, got {events_per_id}")
    if not np.any(graph.base_rates > 0):
        raise ConfigError("all base rates are zero: the first event is empty with certainty")

    names = graph.label_names
    width = len(str(n_ids - 1))
    records: list[EventRecord] = []
    for i, child_seed in enumerate(np.random.SeedSequence(seed).spawn(n_ids)):
        rng = np.random.default_rng(child_seed)
        sid = f"id{i:0{width}d}"
        day = start_date
        prev_labels: np.ndarray | None = None
        prev_amounts = np.zeros(graph.n_labels)
        for _ in range(events_per_id):
            probs = next_label_probs(graph, prev_labels, prev_amounts)
            if not np.any(probs > 0):
                raise ConfigError("event has zero probability of any label; graph is degenerate")
            for _attempt in range(_MAX_RESAMPLES):
                fired = rng.random(graph.n_labels) < probs
                if fired.any():
                    break
            else:
                raise ConfigError("could not draw a nonempty label set; probabilities too small")
            amounts = np.zeros(graph.n_labels)
            present = np.flatnonzero(fired)
            for c in present:
                amounts[c] = rng.lognormal(graph.amount_mu[c], graph.amount_sigma[c])
            records.append(
                EventRecord(
                    sequence_id=sid,
                    date=day,
                    labels=tuple(names[c] for c in present),
                    amounts=tuple(float(amounts[c]) for c in present),
                )
            )
            prev_labels, prev_amounts = fired, amounts
            day = day + dt.timedelta(days=int(rng.geometric(graph.dt_p)))
    return records


def bayes_optimal_scores(graph: PlantedGraph, window: Sequence[EventRecord]) -> np.ndarray:
    """Next-event label probabilities given a history window (only the last
    event matters under the one-step law); columns follow graph label order."""
    if not window:
        return next_label_probs(graph, None)
    index = {name: c for c, name in enumerate(graph.label_names)}
    prev_labels = np.zeros(graph.n_labels, dtype=bool)
    prev_amounts = np.zeros(graph.n_labels)
    last = window[-1]
    for name, amount in zip(last.labels, last.amounts):
        c = index.get(name)
        if c is None:
            raise ConfigError(f"label {name!r} is not part of the planted graph")
        prev_labels[c] = True
        prev_amounts[c] = amount
    return next_label_probs(graph, prev_labels, prev_amounts)


def scores_for_samples(
    graph: PlantedGraph, samples: Sequence[WindowSample], labels: Sequence[str]
) -> np.ndarray:
    """Oracle score matrix with columns aligned to the given label order."""
    index = {name: c for c, name in enumerate(graph.label_names)}
    missing = [name for name in labels if name not in index]
    if missing:
        raise ConfigError(f"labels not in the planted graph: {missing}")
    cols = np.array([index[name] for name in labels])
    out = np.zeros((len(samples), len(labels)))
    for i, s in enumerate(samples):
        out[i] = bayes_optimal_scores(graph, s.window)[cols]
    return out


def chain_graph(k: int = 10, p: float = 1.0, base: float = 0.01) -> PlantedGraph:
    """Cycle i -> i+1 (mod k): each label's sole parent is its predecessor."""
    return PlantedGraph(
        n_labels=k,
        edges=tuple(Edge(parent=i, child=(i + 1) % k, p=p) for i in range(k)),
        base_rates=np.full(k, base),
    )


def random_parent_graph(
    k: int,
    seed: int,
    p_range: tuple[float, float] = (0.6, 0.9),
    base_range: tuple[float, float] = (0.02, 0.3),
) -> PlantedGraph:
    """Each label gets one random parent (derangement-ish via rotation of a
    permutation), with edge and base probabilities drawn from the ranges."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(k)
    edges = tuple(
        Edge(parent=int(perm[i]), child=int(perm[(i + 1) % k]), p=float(rng.uniform(*p_range)))
        for i in range(k)
    )
    return PlantedGraph(n_labels=k, edges=edges, base_rates=rng.uniform(*base_range, size=k))


def amount_gated_graph(k: int, seed: int, p_high: float = 0.9, p_low: float = 0.1) -> PlantedGraph:
    """Like random_parent_graph but edges only fire strongly when the parent's
    amount exceeds its lognormal median, so amounts carry predictive signal."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(k)
    mu = np.zeros(k)
    edges = tuple(
        Edge(
            parent=int(perm[i]),
            child=int(perm[(i + 1) % k]),
            p=p_high,
            amount_gate=float(np.exp(mu[perm[i]])),
            p_low=p_low,
        )
        for i in range(k)
    )
    return PlantedGraph(
        n_labels=k,
        edges=edges,
        base_rates=rng.uniform(0.05, 0.2, size=k),
        amount_mu=mu,
        amount_sigma=np.full(k, 0.5),
    )
