"""Sequential two-pointer coupling, post-selection and meter statistics.

The system (dimension d) is coupled to two qubit meters, B first and then
A, each initialized in |0>.  The couplings are rotations generated by
involutory system observables:

    O_B     = I - 2 |b0><b0|,   |b0> = (1/sqrt(d)) sum_j |a_j>
    O_A^(k) = I - 2 |a_k><a_k|

    U = exp(-i g O (x) sigma_y) = cos(g) I (x) I - i sin(g) O (x) sigma_y

(the closed two-term form is exact because O^2 = I).  After both
couplings the detector under study post-selects the system on outcome l,
and all information about the entry <a_j| Pi_l |a_k> lives in the joint
meter statistics.

Tensor ordering is fixed repo-wide as system (x) meterB (x) meterA.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import EYE2, PAULI, SIGMA_Y, asoperator, dag, is_density, ket, projector, tensor
from .povm import Basis

#: Meter readout bases in canonical order; z = {|0>,|1>}, x = {|+>,|->},
#: y = {(|0>+i|1>)/sqrt2, (|0>-i|1>)/sqrt2}.
BASES = ("z", "x", "y")

#: The nine meter basis settings (basis_b, basis_a), canonical order.
SETTINGS = tuple((bb, ba) for bb in BASES for ba in BASES)

#: Rank-one projectors P[basis][m] with outcome sign (-1)^m.
BASIS_PROJECTORS = {
    b: (
        (np.eye(2, dtype=complex) + PAULI[b]) / 2,
        (np.eye(2, dtype=complex) - PAULI[b]) / 2,
    )
    for b in BASES
}

#: Post-selection probabilities below this are rejected as dead.
P_FLOOR = 1e-14


class DeadPostSelectionError(ValueError):
    """Raised when the post-selection probability is numerically zero."""


@dataclass(frozen=True)
class CouplingConfig:
    """Coupling strengths for the two meters, each strictly inside (0, pi/2).

    The entry estimator currently assumes equal strengths; asymmetric
    configurations evolve fine but are rejected by :meth:`g`.
    """

    g_b: float
    g_a: float

    def __post_init__(self):
        for name, g in (("g_b", self.g_b), ("g_a", self.g_a)):
            if not 0.0 < g < np.pi / 2:
                raise ValueError(
                    f"{name} = {g!r} must lie strictly inside (0, pi/2); "
                    "the estimator divides by sin(g)cos(g)"
                )

    @classmethod
    def symmetric(cls, g: float) -> "CouplingConfig":
        return cls(g, g)

    @property
    def g(self) -> float:
        if self.g_b != self.g_a:
            raise ValueError(
                f"asymmetric couplings (g_b={self.g_b}, g_a={self.g_a}) are not "
                "supported by the entry estimator; use equal strengths"
            )
        return self.g_b


@dataclass(frozen=True)
class JointState:
    """Density operator on system (x) meterB (x) meterA (dimension 4d)."""

    rho: np.ndarray
    system_dim: int

    def __post_init__(self):
        r = asoperator(self.rho)
        if r.shape[0] != 4 * self.system_dim:
            raise ValueError(
                f"joint dimension {r.shape[0]} != 4 * system_dim = {4 * self.system_dim}"
            )
        if not is_density(r, 1e-10):
            raise ValueError("joint state is not a valid density operator within 1e-10")
        object.__setattr__(self, "rho", r)


def pointer_state_b0(d: int) -> np.ndarray:
    """Uniform superposition (1/sqrt(d)) sum_j |a_j>."""
    if d < 2:
        raise ValueError(f"system dimension must be >= 2, got {d}")
    return np.full(d, 1.0 / np.sqrt(d), dtype=complex)


def build_observables(d: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """The two involutory system observables (O_B, O_A^(k))."""
    if not 0 <= k < d:
        raise IndexError(f"index k={k} out of range for dimension {d}")
    o_b = np.eye(d, dtype=complex) - 2 * projector(pointer_state_b0(d))
    o_a = np.eye(d, dtype=complex) - 2 * projector(ket(d, k))
    return o_b, o_a


def coupling_unitary(o: np.ndarray, g: float, which_meter: str) -> np.ndarray:
    """Full 4d-dimensional coupling unitary for one meter.

    ``which_meter`` is "b" or "a"; sigma_y acts on that meter slot and the
    identity on the other.  ``o`` must square to the identity (checked to
    1e-10), which makes the two-term closed form exact.
    """
    o = asoperator(o)
    d = o.shape[0]
    resid = np.abs(o @ o - np.eye(d)).max()
    if resid > 1e-10:
        raise ValueError(f"observable is not involutory: |O^2 - I| max {resid:.3e}")
    if which_meter == "b":
        slot = tensor(SIGMA_Y, EYE2)
    elif which_meter == "a":
        slot = tensor(EYE2, SIGMA_Y)
    else:
        raise ValueError(f"which_meter must be 'b' or 'a', got {which_meter!r}")
    return np.cos(g) * np.eye(4 * d, dtype=complex) - 1j * np.sin(g) * tensor(o, slot)


def evolve_joint(rho_s: np.ndarray, cfg: CouplingConfig, k: int) -> JointState:
    """Couple meter B then meter A to a system state.

    Returns U_A^(k) U_B (rho_s (x) |0><0| (x) |0><0|) U_B^dag U_A^(k)dag.
    The order matters: the two observables do not commute.
    """
    rho_s = asoperator(rho_s)
    d = rho_s.shape[0]
    if not is_density(rho_s, 1e-10):
        raise ValueError("rho_s is not a valid density operator within 1e-10")
    o_b, o_a = build_observables(d, k)
    u_b = coupling_unitary(o_b, cfg.g_b, "b")
    u_a = coupling_unitary(o_a, cfg.g_a, "a")
    p0 = projector(ket(2, 0))
    rho0 = tensor(rho_s, p0, p0)
    u = u_a @ u_b
    return JointState(u @ rho0 @ dag(u), d)


def prepare_entry_state(d: int, j: int, k: int, cfg: CouplingConfig) -> JointState:
    """Joint state for probing entry (j, k): pre-select |a_j><a_j|, couple
    with O_A^(k)."""
    if not 0 <= j < d:
        raise IndexError(f"index j={j} out of range for dimension {d}")
    return evolve_joint(projector(ket(d, j)), cfg, k)


def reduced_meter_operator(js: JointState, pi_l: np.ndarray) -> np.ndarray:
    """Unnormalized post-selected meter operator Tr_s[(Pi_l (x) I4) rho_J].

    Its trace is the post-selection probability, and for any meter operator
    M, Tr[(Pi_l (x) M) rho_J] = Tr[M K] with K the returned 4x4 matrix.
    """
    pi_l = asoperator(pi_l)
    d = js.system_dim
    if pi_l.shape[0] != d:
        raise ValueError(f"element dimension {pi_l.shape[0]} != system dimension {d}")
    r4 = js.rho.reshape(d, 4, d, 4)
    return np.einsum("st,tasb->ab", pi_l, r4)


def postselect_meters(
    js: JointState, pi_l: np.ndarray, p_floor: float = P_FLOOR
) -> tuple[np.ndarray, float]:
    """Post-select on one detector outcome.

    Returns (rho_meters, p_f): the normalized 4-dimensional meter state and
    the outcome probability.  Raises :class:`DeadPostSelectionError` when
    p_f <= p_floor, where the conditional state is numerically meaningless
    and the entry estimate would be dominated by statistical noise.
    """
    k = reduced_meter_operator(js, pi_l)
    p_f = float(np.trace(k).real)
    if p_f <= p_floor:
        raise DeadPostSelectionError(
            f"post-selection probability {p_f:.3e} <= floor {p_floor:.1e}"
        )
    return k / p_f, p_f


def meter_distribution(
    js: JointState, pi_l: np.ndarray, setting: tuple[str, str]
) -> np.ndarray:
    """Unnormalized joint meter probabilities W_mn for one basis setting.

    W[m, n] = Tr[(Pi_l (x) |m_B><m_B| (x) |n_A><n_A|) rho_J]; the four cells
    sum to the post-selection probability, not to 1.
    """
    bb, ba = _check_setting(setting)
    k = reduced_meter_operator(js, pi_l)
    w = np.empty((2, 2))
    for m in range(2):
        for n in range(2):
            proj = tensor(BASIS_PROJECTORS[bb][m], BASIS_PROJECTORS[ba][n])
            w[m, n] = np.trace(proj @ k).real
    return w


def meter_tables(js: JointState, pi_l: np.ndarray) -> dict:
    """All nine setting-indexed W tables for one outcome."""
    k = reduced_meter_operator(js, pi_l)
    tables = {}
    for bb, ba in SETTINGS:
        w = np.empty((2, 2))
        for m in range(2):
            for n in range(2):
                proj = tensor(BASIS_PROJECTORS[bb][m], BASIS_PROJECTORS[ba][n])
                w[m, n] = np.trace(proj @ k).real
        tables[(bb, ba)] = w
    return tables


def exact_entry_tables(
    pi_l: np.ndarray,
    j: int,
    k: int,
    cfg: CouplingConfig,
    basis: Basis | None = None,
) -> dict:
    """Exact W tables for probing entry (j, k) of one element.

    Non-computational bases are handled by expressing the element in the
    requested basis and running the computational-frame pipeline.
    """
    pi_l = asoperator(pi_l)
    if basis is not None and not basis.is_computational():
        pi_l = basis.rotate_operator(pi_l)
    js = prepare_entry_state(pi_l.shape[0], j, k, cfg)
    return meter_tables(js, pi_l)


def joint_meter_observables(d: int, g: float) -> tuple[np.ndarray, np.ndarray]:
    """The single-meter readout observables (P, Q) for coupling strength g.

    P = sqrt(d) [ (I + sigma_z) / (4 cos^2 g) - sigma_x / (4 sin g cos g) ]
    Q = -sqrt(d) sigma_y / (4 sin g cos g)
    """
    if not 0.0 < g < np.pi / 2:
        raise ValueError(f"coupling strength g={g!r} must lie strictly inside (0, pi/2)")
    alpha = 1.0 / (4 * np.cos(g) ** 2)
    beta = 1.0 / (4 * np.sin(g) * np.cos(g))
    p = np.sqrt(d) * (alpha * (EYE2 + PAULI["z"]) - beta * PAULI["x"])
    q = -np.sqrt(d) * beta * PAULI["y"]
    return p, q


def exact_rt_expectation(js: JointState, pi_l: np.ndarray, cfg: CouplingConfig) -> complex:
    """Entry value from the joint meter observables.

    Builds R = P_B P_A - Q_B Q_A and T = P_B Q_A + Q_B P_A and returns
    Tr[(Pi_l (x) R) rho_J] + i Tr[(Pi_l (x) T) rho_J], which equals
    <a_j| Pi_l |a_k> exactly for any coupling strength in (0, pi/2).
    """
    p, q = joint_meter_observables(js.system_dim, cfg.g)
    r = np.kron(p, p) - np.kron(q, q)
    t = np.kron(p, q) + np.kron(q, p)
    km = reduced_meter_operator(js, pi_l)
    re = float(np.trace(r @ km).real)
    im = float(np.trace(t @ km).real)
    return complex(re, im)


def _check_setting(setting) -> tuple[str, str]:
    try:
        bb, ba = setting
    except (TypeError, ValueError):
        raise ValueError(f"setting must be a (basis_b, basis_a) pair, got {setting!r}") from None
    bb, ba = str(bb).lower(), str(ba).lower()
    if bb not in BASES or ba not in BASES:
        raise ValueError(f"meter bases must be among {BASES}, got ({bb!r}, {ba!r})")
    return bb, ba
