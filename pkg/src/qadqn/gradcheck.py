"""Finite-difference checks for the shift-rule and end-to-end network gradients.

Relative error is ``|a - b| / max(|a|, |b|)``.  Entries where both values are
below ``zero_floor`` are structural zeros (for example a circuit angle that
cannot reach the measured qubit); those must agree to ``zero_floor`` in
absolute terms instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .actions import Action
from .agent import Transition
from .network import NetConfig, NetworkParams, clone_params, init_params
from .quantum import QuantumLayer, angle_embed, entangling_circuit, expect_z, param_shift_grad, run_circuit
from .training import batch_loss


@dataclass
class GradcheckReport:
    name: str
    tol: float
    max_rel: dict[str, float] = field(default_factory=dict)     # per parameter group
    zero_violations: dict[str, int] = field(default_factory=dict)
    checked: int = 0
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return (all(v < self.tol for v in self.max_rel.values())
                and not any(self.zero_violations.values()))

    def failing_groups(self) -> list[str]:
        bad = {g for g, v in self.max_rel.items() if not v < self.tol}
        bad |= {g for g, n in self.zero_violations.items() if n}
        return sorted(bad)

    def lines(self) -> list[str]:
        out = [f"{self.name}: {'PASS' if self.passed else 'FAIL'} (tol {self.tol:g}, "
               f"{self.checked} values, {self.seconds:.2f}s)"]
        for g in sorted(set(self.max_rel) | set(self.zero_violations)):
            out.append(f"  {g:<10} max rel err {self.max_rel.get(g, 0.0):.3e}"
                       f"  structural-zero violations {self.zero_violations.get(g, 0)}")
        return out


def rel_error(a, b, zero_floor: float) -> tuple[np.ndarray, np.ndarray]:
    """(relative errors over significant entries, mask of violated structural zeros)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(a), np.abs(b))
    significant = scale >= zero_floor
    rel = np.abs(a - b)[significant] / scale[significant]
    zero_bad = ~significant & (np.abs(a - b) >= zero_floor)
    return rel, zero_bad


def _record(report: GradcheckReport, group: str, rel, zero_bad) -> None:
    worst = float(rel.max()) if rel.size else 0.0
    report.max_rel[group] = max(report.max_rel.get(group, 0.0), worst)
    report.zero_violations[group] = report.zero_violations.get(group, 0) + int(np.sum(zero_bad))
    report.checked += int(np.size(zero_bad))


def check_postnet(trials: int = 20, h: float = 1e-4, tol: float = 1e-6, seed: int = 0,
                  qubits: int = 4, layers: int = 2, readout=(0, 1, 2),
                  zero_floor: float = 1e-8) -> GradcheckReport:
    """Shift-rule gradients of the post-net circuit against central differences.

    Each trial draws angles and an input row, then compares (a) the standalone
    shift rule per observable and (b) the taped layer's gradient of a random
    linear functional of its outputs, for both circuit and input angles.
    """
    start = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(seed))
    spec = entangling_circuit(qubits, layers)
    layer = QuantumLayer(spec, (tuple(readout),))
    report = GradcheckReport("post-net shift rule vs finite differences", tol)
    for _ in range(trials):
        theta = rng.uniform(-np.pi, np.pi, spec.num_params)
        x = rng.uniform(-np.pi, np.pi, qubits)
        psi = angle_embed(x)
        for q in readout:
            shift = param_shift_grad(spec, theta, psi, q)
            fd = np.empty_like(theta)
            for k in range(theta.size):
                tp, tm = theta.copy(), theta.copy()
                tp[k] += h
                tm[k] -= h
                fd[k] = (expect_z(run_circuit(spec, tp, psi), q) - expect_z(run_circuit(spec, tm, psi), q)) / (2 * h)
            _record(report, "theta", *rel_error(shift, fd, zero_floor))

        w = rng.normal(size=len(readout))

        def f(xv, tv):
            return float(layer(xv, [tv]) @ w)

        tape = ad.Tape()
        xn, tn = tape.leaf(x, "x"), tape.leaf(theta, "theta")
        out = ad.sum_(ad.mul(layer(xn, [tn]), w))
        grads = tape.backward(out)
        for name, base, grad in (("input", x, grads[xn]), ("theta", theta, grads[tn])):
            fd = np.empty_like(base)
            for k in range(base.size):
                bp, bm = base.copy(), base.copy()
                bp[k] += h
                bm[k] -= h
                if name == "input":
                    fd[k] = (f(bp, theta) - f(bm, theta)) / (2 * h)
                else:
                    fd[k] = (f(x, bp) - f(x, bm)) / (2 * h)
            _record(report, f"layer.{name}", *rel_error(grad, fd, zero_floor))
    report.seconds = time.perf_counter() - start
    return report


def frozen_batch(config: NetConfig, size: int, rng: np.random.Generator, scale: float = 0.5) -> list[Transition]:
    """Random windows and rewards.  ``scale`` sets the window entries' spread;
    values well above daily log-return size keep the LSTM gradients measurable."""
    shape = (config.window, config.features)
    return [Transition(rng.normal(scale=scale, size=shape), Action(int(rng.integers(config.actions))),
                       float(rng.uniform(-0.05, 0.05)), rng.normal(scale=scale, size=shape),
                       bool(rng.random() < 0.2))
            for _ in range(size)]


def check_network(n_params: int = 10, h: float = 1e-5, tol: float = 1e-3, seed: int = 0,
                  config: NetConfig = NetConfig(), batch: int = 8, gamma: float = 0.95,
                  delta: float = 1.0, zero_floor: float = 1e-9, min_grad: float = 1e-7,
                  params: NetworkParams | None = None) -> GradcheckReport:
    """Huber TD loss gradient on a frozen batch against central differences.

    Parameters are drawn at random so that every group contributes at least
    one; draws are restricted to entries whose analytic gradient exceeds
    ``min_grad`` (structurally inert entries are checked separately: their
    finite difference must vanish).
    """
    start = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(seed))
    params = init_params(config, seed) if params is None else clone_params(params)
    target = init_params(config, seed + 1)
    transitions = frozen_batch(config, batch, rng)
    weights = rng.uniform(0.5, 1.0, batch)

    def loss_of(p: NetworkParams) -> float:
        return batch_loss(p, target, transitions, weights, gamma, delta)[0]

    _, _, grads = batch_loss(params, target, transitions, weights, gamma, delta)
    groups = params.groups()
    names = sorted(groups)
    picks: list[tuple[str, str, int]] = []
    inert: list[tuple[str, str, int]] = []
    for i in range(max(n_params, len(names))):
        group = names[i % len(names)] if i < len(names) else names[int(rng.integers(len(names)))]
        flat = np.concatenate([grads[n].ravel() for n in groups[group]])
        owners = [(n, j) for n in groups[group] for j in range(grads[n].size)]
        live = np.flatnonzero(np.abs(flat) > min_grad)
        dead = np.flatnonzero(np.abs(flat) <= min_grad)
        if live.size:
            name, j = owners[int(rng.choice(live))]
            picks.append((group, name, j))
        if dead.size:
            name, j = owners[int(rng.choice(dead))]
            inert.append((group, name, j))

    report = GradcheckReport("network Huber loss vs finite differences", tol)

    def fd(name: str, j: int) -> float:
        p = clone_params(params)
        flat = p.arrays[name].reshape(-1)
        base = flat[j]
        flat[j] = base + h
        up = loss_of(p)
        flat[j] = base - h
        down = loss_of(p)
        return (up - down) / (2 * h)

    for group, name, j in picks:
        rel, zero_bad = rel_error([grads[name].ravel()[j]], [fd(name, j)], zero_floor)
        _record(report, group, rel, zero_bad)
    for group, name, j in inert:
        num = fd(name, j)
        bad = abs(num - grads[name].ravel()[j]) >= min_grad
        report.zero_violations[group] = report.zero_violations.get(group, 0) + int(bad)
        report.max_rel.setdefault(group, 0.0)
        report.checked += 1
    report.seconds = time.perf_counter() - start
    return report


def run_all(tol_shift: float = 1e-6, tol_network: float = 1e-3, seed: int = 0,
            config: NetConfig = NetConfig()) -> list[GradcheckReport]:
    return [check_postnet(tol=tol_shift, seed=seed, qubits=config.qubits, layers=config.layers,
                          readout=tuple(range(config.actions))),
            check_network(tol=tol_network, seed=seed, config=config)]
