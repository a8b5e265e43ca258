"""Desk-scale federated training: local SGD, weighted aggregation, a hash-chained
ledger stub and the convergence-bound calculator.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import BlockRejectedError, TrainingDivergedError


class SoftmaxRegression:
    """Multinomial logistic regression with an L2 penalty on all weights.

    Weights are a flat vector holding a ``(dim + 1) x num_classes`` matrix, the
    last row being the bias.
    """

    def __init__(self, dim: int, num_classes: int, l2: float = 1e-3):
        self.dim = dim
        self.num_classes = num_classes
        self.l2 = l2

    @property
    def size(self) -> int:
        return (self.dim + 1) * self.num_classes

    def init(self) -> np.ndarray:
        return np.zeros(self.size)

    def _design(self, X):
        return np.hstack([X, np.ones((len(X), 1))])

    def _probs(self, w, Xb):
        logits = Xb @ w.reshape(self.dim + 1, self.num_classes)
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True), logits

    def loss(self, w, X, y) -> float:
        Xb = self._design(X)
        p, logits = self._probs(w, Xb)
        logz = np.log(np.exp(logits).sum(axis=1))
        nll = np.mean(logz - logits[np.arange(len(y)), y])
        return float(nll + 0.5 * self.l2 * w @ w)

    def grad(self, w, X, y) -> np.ndarray:
        Xb = self._design(X)
        p, _ = self._probs(w, Xb)
        p[np.arange(len(y)), y] -= 1.0
        return (Xb.T @ p / len(y)).ravel() + self.l2 * w

    def accuracy(self, w, X, y) -> float:
        p, _ = self._probs(w, self._design(X))
        return float(np.mean(p.argmax(axis=1) == y))

    def smoothness(self, X) -> float:
        """Upper bound on the gradient Lipschitz constant over data ``X``.

        The softmax Hessian block diag(p) - p p^T has spectral norm at most 1/2.
        """
        Xb = self._design(X)
        return 0.5 * float(np.linalg.eigvalsh(Xb.T @ Xb / len(Xb))[-1]) + self.l2


def local_train(w, data, eta: float, local_iters: int, batch_size: int | None,
                rng: np.random.Generator, model):
    """Run ``local_iters`` mini-batch SGD steps; return new weights and per-step gradient norms.

    ``batch_size=None`` uses the full local dataset every step.
    """
    if local_iters < 1:
        raise ValueError("local_iters must be >= 1")
    if eta < 0:
        raise ValueError("learning rate must be non-negative")
    w = np.array(w, dtype=float)
    X, y = data.features, data.labels
    n = len(y)
    norms = np.empty(local_iters)
    for h in range(local_iters):
        if batch_size is None or batch_size >= n:
            g = model.grad(w, X, y)
        else:
            idx = rng.choice(n, size=batch_size, replace=False)
            g = model.grad(w, X[idx], y[idx])
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient at local step {h} (owner {data.owner})")
        norms[h] = np.linalg.norm(g)
        w = w - eta * g
    if not np.all(np.isfinite(w)):
        raise TrainingDivergedError(f"non-finite weights after local training (owner {data.owner})")
    return w, norms


def aggregate(models) -> np.ndarray:
    """Dataset-size weighted mean of ``(weights, dataset_size)`` pairs, correctly rounded.

    Accumulated in exact rationals, so the result is the float nearest the
    true mean: identical models come back unchanged and order never matters.
    """
    models = [(np.asarray(w, dtype=float), n) for w, n in models]
    if not models:
        raise ValueError("nothing to aggregate")
    shape = models[0][0].shape
    for w, _ in models:
        if w.shape != shape:
            raise ValueError(f"model shape mismatch: {w.shape} vs {shape}")
    total = sum(int(n) for _, n in models)
    if total <= 0:
        raise ValueError("dataset sizes must sum to a positive number")
    cols = zip(*(w.ravel().tolist() for w, _ in models))
    sizes = [int(n) for _, n in models]
    out = [float(sum(Fraction(x) * n for x, n in zip(col, sizes)) / total) for col in cols]
    return np.array(out).reshape(shape)


# -- ledger stub ---------------------------------------------------------------

def model_digest(w) -> str:
    text = ",".join(f"{x + 0.0:.12g}" for x in np.asarray(w, dtype=float).ravel())
    return hashlib.sha256(text.encode()).hexdigest()


GENESIS_DIGEST = "0" * 64


@dataclass(frozen=True)
class LedgerBlock:
    round: int
    miner: int
    global_model_digest: str
    selected: tuple
    delay_breakdown: tuple
    prev_digest: str
    digest: str = ""

    def payload(self) -> dict:
        d = asdict(self)
        d.pop("digest")
        d["selected"] = list(self.selected)
        d["delay_breakdown"] = [float(x) for x in self.delay_breakdown]
        return d

    def compute_digest(self) -> str:
        text = json.dumps(self.payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def sealed(self) -> "LedgerBlock":
        return LedgerBlock(**{**self.payload(), "selected": self.selected,
                              "delay_breakdown": self.delay_breakdown, "digest": self.compute_digest()})

    def to_json(self) -> str:
        return json.dumps({**self.payload(), "digest": self.digest}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "LedgerBlock":
        d = json.loads(line)
        d["selected"] = tuple(d["selected"])
        d["delay_breakdown"] = tuple(d["delay_breakdown"])
        return cls(**d)


def genesis_block() -> LedgerBlock:
    return LedgerBlock(-1, -1, GENESIS_DIGEST, (), (0.0, 0.0), GENESIS_DIGEST).sealed()


class Ledger:
    def __init__(self, blocks=None):
        self.blocks = list(blocks) if blocks else [genesis_block()]

    @property
    def head(self) -> LedgerBlock:
        return self.blocks[-1]

    def __len__(self) -> int:
        return len(self.blocks)

    def append(self, block: LedgerBlock, local_model=None) -> None:
        """Verify a mined block and add it to the chain.

        ``local_model`` is the verifier's own aggregate; its digest must match
        the one carried by the block.
        """
        if block.prev_digest != self.head.digest:
            raise BlockRejectedError(f"round {block.round}: block does not extend the chain head")
        if block.digest != block.compute_digest():
            raise BlockRejectedError(f"round {block.round}: block digest does not match its contents")
        if local_model is not None and model_digest(local_model) != block.global_model_digest:
            raise BlockRejectedError(f"round {block.round}: global model differs from local aggregate")
        self.blocks.append(block)

    def verify_chain(self) -> bool:
        prev = None
        for b in self.blocks:
            if b.digest != b.compute_digest():
                return False
            if prev is not None and b.prev_digest != prev.digest:
                return False
            prev = b
        return self.blocks[0] == genesis_block()

    def export(self, path) -> None:
        with open(path, "w") as fh:
            for b in self.blocks:
                fh.write(b.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "Ledger":
        with open(path) as fh:
            return cls([LedgerBlock.from_json(line) for line in fh if line.strip()])


def pick_miner(mining_freqs, rng: np.random.Generator) -> int:
    """Winner of the race among exponential clocks with rates proportional to f_bloc."""
    f = np.asarray(mining_freqs, dtype=float)
    return int(rng.choice(len(f), p=f / f.sum()))


def mine_and_append(ledger: Ledger, round_index: int, global_model, selected, delay_breakdown,
                    mining_freqs, rng: np.random.Generator, local_model=None) -> LedgerBlock:
    miner = pick_miner(mining_freqs, rng)
    block = LedgerBlock(round_index, miner, model_digest(global_model), tuple(sorted(selected)),
                        tuple(float(x) for x in delay_breakdown), ledger.head.digest).sealed()
    ledger.append(block, global_model if local_model is None else local_model)
    return block


# -- convergence bound ---------------------------------------------------------

@dataclass(frozen=True)
class BoundInputs:
    eta: float
    local_iters: int
    rounds: int
    smoothness: float
    grad_bound: float
    initial_gap: float
    betas: tuple
    dataset_sizes: tuple

    @property
    def num_clients(self) -> int:
        return len(self.betas)


def lemma1_terms(b: BoundInputs, total_size: float | None = None) -> tuple[float, float, float, float]:
    """The four right-hand-side terms of the average squared-gradient bound."""
    beta = np.asarray(b.betas, dtype=float)
    n = np.asarray(b.dataset_sizes, dtype=float)
    D = float(n.sum()) if total_size is None else float(total_size)
    U, eta, H, L, G2 = b.num_clients, b.eta, b.local_iters, b.smoothness, b.grad_bound ** 2
    w = n / D
    t1 = 2 * b.initial_gap / (eta * H * b.rounds)
    t2 = 2 * eta * L * H * G2 * float(np.sum(beta * w)) * float(np.sum((1 - beta) * w))
    t3 = eta * U * L * H * G2 * (eta * H + 1) * float(np.sum(beta**2 * w**2))
    t4 = U * G2 * float(np.sum((1 - beta) ** 2 * w**2))
    return t1, t2, t3, t4


def lemma1_bound(b: BoundInputs, total_size: float | None = None) -> float:
    return sum(lemma1_terms(b, total_size))
