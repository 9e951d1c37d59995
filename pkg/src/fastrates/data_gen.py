"""Offline datasets of iid transitions and their design statistics."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-major storage of n transitions (s_i, a_i, r_i, s'_i)."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    seed: int | None = None
    behavior_id: str = ""

    def __post_init__(self):
        n = len(self.actions)
        if n < 1:
            raise ValueError("a dataset needs at least one sample")
        if not (len(self.states) == len(self.rewards) == len(self.next_states) == n):
            raise ValueError("dataset columns have inconsistent lengths")
        for arr in (self.states, self.actions, self.rewards, self.next_states):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.actions)

    @property
    def samples(self):
        return list(zip(self.states, self.actions, self.rewards, self.next_states))

    # -- CSV / JSON sidecar ------------------------------------------------
    def to_csv(self) -> str:
        s = self.states.reshape(self.n, -1)
        sp = self.next_states.reshape(self.n, -1)
        k = s.shape[1]
        header = [f"s{j}" for j in range(k)] + ["a", "r"] + [f"sp{j}" for j in range(k)]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for i in range(self.n):
            w.writerow([repr(float(x)) for x in s[i]] + [int(self.actions[i]),
                       repr(float(self.rewards[i]))] + [repr(float(x)) for x in sp[i]])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"n": self.n, "seed": self.seed, "behavior_id": self.behavior_id,
                "state_shape": list(self.states.shape[1:]),
                "state_dtype": "int" if np.issubdtype(self.states.dtype, np.integer) else "float"}

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_csv())
        path.with_suffix(".json").write_text(json.dumps(self.sidecar()))

    @classmethod
    def from_csv(cls, text: str, sidecar: dict | None = None) -> "Dataset":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        k = sum(1 for h in header if h.startswith("s") and not h.startswith("sp"))
        table = np.array(body, dtype=float).reshape(len(body), 2 * k + 2)
        sidecar = sidecar or {}
        shape = tuple(sidecar.get("state_shape", [k]))
        dtype = int if sidecar.get("state_dtype") == "int" else float
        states = table[:, :k].astype(dtype).reshape((len(body),) + shape)
        next_states = table[:, k + 2:].astype(dtype).reshape((len(body),) + shape)
        if sidecar.get("n") is not None and sidecar["n"] != len(body):
            raise DataError("sidecar n does not match the CSV row count")
        return cls(states, table[:, k].astype(int), table[:, k + 1].copy(), next_states,
                   seed=sidecar.get("seed"), behavior_id=sidecar.get("behavior_id", ""))

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        side = path.with_suffix(".json")
        sidecar = json.loads(side.read_text()) if side.exists() else None
        return cls.from_csv(path.read_text(), sidecar)


@dataclass(frozen=True)
class DesignStats:
    sigma_hat: np.ndarray
    lambda_min: float
    n: int


def draw_dataset(mdp, behavior, n: int, rng: np.random.Generator, seed=None,
                 behavior_id: str = "") -> Dataset:
    """Draw n iid transitions with (s, a) from ``behavior(rng, n)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    states, actions = behavior(rng, n)
    actions = np.asarray(actions, dtype=int)
    rewards = np.asarray(mdp.reward(states, actions, rng), dtype=float)
    next_states = mdp.transition(states, actions, rng)
    return Dataset(np.asarray(states), actions, rewards, np.asarray(next_states),
                   seed=seed, behavior_id=behavior_id)


def feature_matrix(dataset: Dataset, feature_map) -> np.ndarray:
    phi = np.asarray(feature_map(dataset.states, dataset.actions), dtype=float)
    if not np.all(np.isfinite(phi)):
        bad = int(np.argwhere(~np.isfinite(phi))[0, 0])
        raise DataError(f"non-finite feature value at sample {bad}")
    return phi


def next_state_features(dataset: Dataset, feature_map, num_actions: int) -> np.ndarray:
    """Features of every action at every next state, shape (n, |A|, d)."""
    out = np.stack([feature_map(dataset.next_states, np.full(dataset.n, a))
                    for a in range(num_actions)], axis=1)
    if not np.all(np.isfinite(out)):
        bad = int(np.argwhere(~np.isfinite(out))[0, 0])
        raise DataError(f"non-finite next-state feature at sample {bad}")
    return out


def design_stats(dataset: Dataset, feature_map) -> DesignStats:
    phi = feature_matrix(dataset, feature_map)
    sigma = phi.T @ phi
    sigma = 0.5 * (sigma + sigma.T)
    # symmetric eigensolver (LAPACK syevd)
    lam = float(np.linalg.eigvalsh(sigma)[0])
    return DesignStats(sigma, lam, dataset.n)
