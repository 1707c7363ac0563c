"""Dense statevector simulation for small Rx/CNOT circuits.

States are complex numpy arrays of length ``2**n`` (optionally with leading
batch axes).  Qubit 0 is the most significant bit of the basis index, so on
two qubits ``|10>`` is index 2.  Expectations are exact Born-rule sums; there
is no shot noise anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import autodiff as ad

SHIFT = np.pi / 2


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str            # "rx", "rz" or "cnot"
    qubits: tuple[int, ...]
    slot: int | None = None   # index into the parameter vector for rotations


@dataclass(frozen=True)
class CircuitSpec:
    n: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        slots = []
        for g in self.gates:
            if any(q < 0 or q >= self.n for q in g.qubits):
                raise CircuitError(f"qubit index out of range in {g}")
            if g.kind == "cnot" and g.qubits[0] == g.qubits[1]:
                raise CircuitError("CNOT control and target must differ")
            if g.slot is not None:
                slots.append(g.slot)
        if sorted(set(slots)) != list(range(len(set(slots)))):
            raise CircuitError("rotation slots must reference a contiguous parameter vector")

    @property
    def num_params(self) -> int:
        return len({g.slot for g in self.gates if g.slot is not None})


def entangling_circuit(n: int = 4, layers: int = 2) -> CircuitSpec:
    """Per layer: Rx(theta[l, i]) on every qubit, then CNOT(0,1), ..., CNOT(n-2, n-1)."""
    gates = []
    for l in range(layers):
        gates += [Gate("rx", (i,), l * n + i) for i in range(n)]
        gates += [Gate("cnot", (i, i + 1)) for i in range(n - 1)]
    return CircuitSpec(n, tuple(gates))


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1.0
    return psi


def num_qubits(state: np.ndarray) -> int:
    n = int(state.shape[-1]).bit_length() - 1
    if 2**n != state.shape[-1]:
        raise CircuitError("state length is not a power of two")
    return n


def _check_qubit(q: int, n: int):
    if not 0 <= q < n:
        raise CircuitError(f"qubit {q} out of range for {n} qubits")


def _apply_1q(state: np.ndarray, qubit: int, m: np.ndarray) -> np.ndarray:
    n = num_qubits(state)
    _check_qubit(qubit, n)
    lead = state.shape[:-1]
    s = state.reshape(lead + (2**qubit, 2, 2 ** (n - qubit - 1)))
    return (m @ s).reshape(state.shape)


def rx_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rz_matrix(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])


def apply_rx(state: np.ndarray, qubit: int, angle: float) -> np.ndarray:
    return _apply_1q(state, qubit, rx_matrix(angle))


def apply_rz(state: np.ndarray, qubit: int, angle: float) -> np.ndarray:
    return _apply_1q(state, qubit, rz_matrix(angle))


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n)
    cbit, tbit = 1 << (n - 1 - control), 1 << (n - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    n = num_qubits(state)
    _check_qubit(control, n)
    _check_qubit(target, n)
    if control == target:
        raise CircuitError("CNOT control and target must differ")
    return state[..., _cnot_perm(n, control, target)]


def angle_embed(x: Sequence[float] | np.ndarray, n: int | None = None) -> np.ndarray:
    """Product state ``prod_j Rx(x_j)^dagger |0>``; batched over leading axes of ``x``.

    Each factor is ``Rx(-x_j)|0> = (cos(x_j/2), i sin(x_j/2))``.
    """
    x = np.asarray(x, dtype=float)
    if n is not None and x.shape[-1] != n:
        raise CircuitError(f"expected {n} embedding angles, got {x.shape[-1]}")
    half = 0.5 * x
    factors = np.stack([np.cos(half), 1j * np.sin(half)], axis=-1)   # (..., n, 2)
    psi = factors[..., 0, :]
    for j in range(1, x.shape[-1]):
        psi = (psi[..., :, None] * factors[..., j, None, :]).reshape(x.shape[:-1] + (-1,))
    return psi


def run_circuit(spec: CircuitSpec, theta, state: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != spec.num_params:
        raise CircuitError(f"circuit expects {spec.num_params} parameters, got {theta.size}")
    if state.shape[-1] != 2**spec.n:
        raise CircuitError("state size does not match circuit width")
    for g in spec.gates:
        if g.kind == "rx":
            state = apply_rx(state, g.qubits[0], theta[g.slot])
        elif g.kind == "rz":
            state = apply_rz(state, g.qubits[0], theta[g.slot])
        elif g.kind == "cnot":
            state = apply_cnot(state, *g.qubits)
        else:
            raise CircuitError(f"unknown gate {g.kind!r}")
    return state


def circuit_unitary(spec: CircuitSpec, theta) -> np.ndarray:
    """Full 2^n x 2^n matrix of the circuit (columns are images of basis states)."""
    return circuit_unitaries(spec, np.asarray(theta, dtype=float).reshape(1, -1))[0]


def circuit_unitaries(spec: CircuitSpec, thetas: np.ndarray) -> np.ndarray:
    """Unitaries for a batch of parameter vectors ``thetas`` (K, P) -> (K, 2^n, 2^n)."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != spec.num_params:
        raise CircuitError(f"expected (K, {spec.num_params}) parameter batch, got {thetas.shape}")
    K, d = thetas.shape[0], 2**spec.n
    # rows index the input basis state; transposed at the end
    state = np.broadcast_to(np.eye(d, dtype=complex), (K, d, d)).copy()
    for g in spec.gates:
        if g.kind == "cnot":
            state = apply_cnot(state, *g.qubits)
            continue
        half = 0.5 * thetas[:, g.slot]
        m = np.empty((K, 2, 2), dtype=complex)
        if g.kind == "rx":
            c, s = np.cos(half), np.sin(half)
            m[:, 0, 0] = m[:, 1, 1] = c
            m[:, 0, 1] = m[:, 1, 0] = -1j * s
        elif g.kind == "rz":
            m[:, 0, 0], m[:, 1, 1] = np.exp(-1j * half), np.exp(1j * half)
            m[:, 0, 1] = m[:, 1, 0] = 0
        else:
            raise CircuitError(f"unknown gate {g.kind!r}")
        q = g.qubits[0]
        sh = state.reshape(K, d, 2**q, 2, 2 ** (spec.n - q - 1))
        state = (m[:, None, None] @ sh).reshape(K, d, d)
    return state.transpose(0, 2, 1)


@lru_cache(maxsize=None)
def _z_signs(n: int, qubit: int) -> np.ndarray:
    idx = np.arange(2**n)
    return 1.0 - 2.0 * ((idx >> (n - 1 - qubit)) & 1)


def expect_z(state: np.ndarray, qubit: int) -> np.ndarray | float:
    n = num_qubits(state)
    _check_qubit(qubit, n)
    out = (np.abs(state) ** 2) @ _z_signs(n, qubit)
    return float(out) if np.ndim(out) == 0 else out


def z_observables(spec: CircuitSpec, theta, qubits: Sequence[int]) -> np.ndarray:
    """Heisenberg-picture observables U^dagger Z_q U, shape (len(qubits), 2^n, 2^n)."""
    return _heisenberg(circuit_unitary(spec, theta)[None], spec.n, qubits)[0]


def _heisenberg(u: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    """(K, d, d) unitaries -> (K, len(qubits), d, d) observables U^dagger Z_q U."""
    udag = u.conj().transpose(0, 2, 1)
    return np.stack([(udag * _z_signs(n, q)) @ u for q in qubits], axis=1)


def param_shift_grad(spec: CircuitSpec, theta, input_state: np.ndarray, observable: int) -> np.ndarray:
    """d<Z_observable>/d theta_k = [E(theta_k + pi/2) - E(theta_k - pi/2)] / 2."""
    for g in spec.gates:
        if g.slot is not None and g.kind != "rx":
            raise CircuitError(f"parameter-shift rule here supports Rx only, found {g.kind}")
    theta = np.asarray(theta, dtype=float).ravel()
    grad = np.empty(theta.size)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += SHIFT
        tm[k] -= SHIFT
        ep = expect_z(run_circuit(spec, tp, input_state), observable)
        em = expect_z(run_circuit(spec, tm, input_state), observable)
        grad[k] = 0.5 * (ep - em)
    return grad


def _embed_real(x: np.ndarray) -> np.ndarray:
    """Real amplitudes of :func:`angle_embed`; the state is ``phase(n) * result``."""
    half = 0.5 * x
    factors = np.stack([np.cos(half), np.sin(half)], axis=-1)
    phi = factors[..., 0, :]
    for j in range(1, x.shape[-1]):
        phi = (phi[..., :, None] * factors[..., j, None, :]).reshape(x.shape[:-1] + (-1,))
    return phi


@lru_cache(maxsize=None)
def _phase(n: int) -> np.ndarray:
    popcount = np.array([bin(k).count("1") for k in range(2**n)])
    return 1j ** popcount


def _real_form(obs: np.ndarray, n: int) -> np.ndarray:
    """Re(P^dagger O P) so that <psi|O|psi> = phi^T M phi for embedded states."""
    ph = _phase(n)
    return (ph.conj()[:, None] * obs * ph[None, :]).real


def _quadratic(phi: np.ndarray, forms: np.ndarray) -> np.ndarray:
    """phi_n^T M_k phi_n for phi (N, d) and forms (K, d, d) -> (N, K)."""
    d = phi.shape[-1]
    m_phi = (phi @ forms.transpose(2, 0, 1).reshape(d, -1)).reshape(phi.shape[0], -1, d)
    return np.einsum("nki,ni->nk", m_phi, phi)


@lru_cache(maxsize=None)
def _qubit_rotation(n: int, qubit: int, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return np.kron(np.kron(np.eye(2**qubit), rot), np.eye(2 ** (n - qubit - 1)))


@dataclass(frozen=True)
class QuantumLayer:
    """Angle-embed each input row, run one or more circuits, measure Z on given qubits.

    ``readouts`` lists, per circuit, the qubits whose <Z> is returned; outputs
    are concatenated in that order.  All circuits share ``spec`` and the input
    embedding, each with its own parameter vector.  On a tape, the backward
    pass applies the two-term shift rule to both circuit angles and input
    (embedding) angles.
    """

    spec: CircuitSpec
    readouts: tuple[tuple[int, ...], ...]

    @property
    def width(self) -> int:
        return sum(len(r) for r in self.readouts)

    def _observables(self, tvals: np.ndarray) -> np.ndarray:
        """(C, P) angles -> (width, d, d) stacked readout observables."""
        return _readout_forms(self.spec, self.readouts, tvals.shape, tvals.tobytes())

    def __call__(self, x, thetas: Sequence):
        """Expectations for input rows ``x`` (..., n) -> (..., width)."""
        if len(thetas) != len(self.readouts):
            raise CircuitError("one parameter vector per circuit is required")
        n = self.spec.n
        xv = ad.value(x)
        if xv.shape[-1] != n:
            raise CircuitError(f"expected rows of {n} angles, got {xv.shape[-1]}")
        lead = xv.shape[:-1]
        rows = xv.reshape(-1, n)
        tvals = np.stack([ad.value(t).ravel() for t in thetas])
        psi = _embed_real(rows)
        obs = self._observables(tvals)
        out = _quadratic(psi, obs).reshape(lead + (self.width,))
        if not _on_tape(x, thetas):
            return out

        def vjp(g):
            g2 = g.reshape(-1, self.width)
            grads = [None] * (1 + len(thetas))
            if isinstance(x, ad.Node) and x.requires_grad:
                grads[0] = self._input_grad(psi, obs, g2).reshape(xv.shape)
            wanted = [c for c, t in enumerate(thetas) if isinstance(t, ad.Node) and t.requires_grad]
            if wanted:
                for c, grad in self._theta_grads(tvals, psi, g2, wanted).items():
                    grads[1 + c] = grad.reshape(ad.value(thetas[c]).shape)
            return tuple(grads)

        return ad.custom(out, (x, *thetas), vjp)

    def _input_grad(self, phi, forms, g2):
        # Shifting embedding angle j by +-pi/2 rotates that qubit's real amplitude
        # pair by +-pi/4, so E(x_j +- pi/2) = phi^T R^T M R phi with fixed R.
        n = self.spec.n
        shift_forms = []
        for j in range(n):
            rp, rm = _qubit_rotation(n, j, SHIFT / 2), _qubit_rotation(n, j, -SHIFT / 2)
            shift_forms.append(0.5 * (rp.T @ forms @ rp - rm.T @ forms @ rm))
        diff = _quadratic(phi, np.concatenate(shift_forms)).reshape(phi.shape[0], n, -1)
        return (diff * g2[:, None, :]).sum(axis=-1)

    def _theta_grads(self, tvals, psi, g2, wanted):
        C, P = tvals.shape
        # rho_k = sum_n g[n, k] phi_n phi_n^T
        weighted = g2[:, :, None] * psi[:, None, :]
        rho = np.tensordot(weighted, psi, axes=([0], [0]))   # (width, d, d)
        shifts = np.concatenate([SHIFT * np.eye(P), -SHIFT * np.eye(P)])
        batch = np.concatenate([tvals[c][None] + shifts for c in wanted])
        d = 2**self.spec.n
        u = circuit_unitaries(self.spec, batch).reshape(len(wanted), 2, P, d, d)
        offsets = np.cumsum([0] + [len(r) for r in self.readouts])
        out = {}
        for w, c in enumerate(wanted):
            r = self.readouts[c]
            op = _heisenberg(u[w, 0], self.spec.n, r)             # (P, k, d, d)
            om = _heisenberg(u[w, 1], self.spec.n, r)
            d_obs = _real_form(0.5 * (op - om), self.spec.n)
            rc = rho[offsets[c]:offsets[c + 1]]                    # (k, d, d)
            # tr(D rho) summed over the readouts of this circuit
            out[c] = (d_obs * rc[None]).sum(axis=(1, 2, 3))
        return out


@lru_cache(maxsize=16)
def _readout_forms(spec: CircuitSpec, readouts, shape, raw: bytes) -> np.ndarray:
    # keyed on the exact angle bytes: target networks and repeated forward
    # passes between optimizer steps reuse the same observables
    u = circuit_unitaries(spec, np.frombuffer(raw).reshape(shape))
    obs = np.concatenate([_heisenberg(u[c:c + 1], spec.n, r)[0] for c, r in enumerate(readouts)])
    forms = _real_form(obs, spec.n)
    forms.flags.writeable = False
    return forms


def _on_tape(x, thetas) -> bool:
    return isinstance(x, ad.Node) or any(isinstance(t, ad.Node) for t in thetas)
