"""Effective two-level Hamiltonian of a chiral molecule coupled to a flat continuum.

The two bound states are driven around a closed three-color loop; after
eliminating the continuum the bound amplitudes obey ``i dc/dt = H c`` with

    H = [[-i G1/2,            -i/2 r + s W],
         [-i/2 conj(r) + s W,  D - i G2/2]]

where ``r`` is the Raman (two-photon) coupling, ``W`` the one-photon Rabi
frequency and ``s = +1/-1`` for the right/left enantiomer.  All quantities are
in atomic units.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .averaging import MicroscopicParams

# |delta| below this fraction of scale**2 counts as coalescence.
EP_THRESHOLD = 1e-20


class Handedness(enum.Enum):
    RIGHT = "R"
    LEFT = "L"

    @property
    def sign(self) -> int:
        return 1 if self is Handedness.RIGHT else -1

    @property
    def mirror(self) -> "Handedness":
        return Handedness.LEFT if self is Handedness.RIGHT else Handedness.RIGHT

    @classmethod
    def parse(cls, value) -> "Handedness":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        if key in ("R", "RIGHT"):
            return cls.RIGHT
        if key in ("L", "LEFT"):
            return cls.LEFT
        raise ValueError(f"unknown handedness {value!r}")


@dataclass(frozen=True)
class EffectiveParams:
    """Knobs of the reduced model.

    ``omega12`` is the Rabi frequency of the right enantiomer; the left one
    sees ``-omega12``.  ``raman`` defaults to ``sqrt(gamma1 * gamma2)``, the
    value obtained when all dipole-field products are real.
    """

    gamma1: float
    gamma2: float
    delta: float = 0.0
    omega12: float = 0.0
    raman: complex | None = None
    handedness: Handedness = Handedness.RIGHT

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "delta", "omega12"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ValueError("decay rates must be non-negative")
        if self.raman is None:
            object.__setattr__(self, "raman", math.sqrt(self.gamma1 * self.gamma2))
        raman = complex(self.raman)
        if not (math.isfinite(raman.real) and math.isfinite(raman.imag)):
            raise ValueError("raman coupling must be finite")
        bound = self.gamma1 * self.gamma2
        if abs(raman) ** 2 > bound * (1 + 1e-9) + 1e-300:
            raise ValueError("|raman|^2 exceeds gamma1*gamma2 (Cauchy-Schwarz bound)")
        object.__setattr__(self, "handedness", Handedness.parse(self.handedness))

    @property
    def mean_decay(self) -> float:
        return 0.5 * (self.gamma1 + self.gamma2)

    @property
    def half_difference(self) -> float:
        return 0.5 * (self.gamma1 - self.gamma2)

    @property
    def rabi(self) -> float:
        """Rabi frequency seen by this enantiomer."""
        return self.handedness.sign * self.omega12

    @property
    def cyclic(self) -> complex:
        """Three-photon cyclic element (d1.F1)*(d2.F2)(d12.F3).

        With raman = pi (d1.F1)(d2.F2)* and rabi = -(d12.F3)/2 this equals
        -2 conj(raman) rabi / pi.
        """
        return -2.0 * complex(self.raman).conjugate() * self.rabi / math.pi

    @property
    def scale(self) -> float:
        return self.gamma1 + self.gamma2 + abs(self.delta) + abs(self.omega12)

    def with_(self, **changes) -> "EffectiveParams":
        return replace(self, **changes)

    def mirrored(self) -> "EffectiveParams":
        return replace(self, handedness=self.handedness.mirror)


def build_hamiltonian(params: EffectiveParams) -> np.ndarray:
    r = complex(params.raman)
    s = params.rabi
    h = np.empty((2, 2), dtype=complex)
    h[0, 0] = -0.5j * params.gamma1
    h[0, 1] = -0.5j * r + s
    h[1, 0] = -0.5j * r.conjugate() + s
    h[1, 1] = params.delta - 0.5j * params.gamma2
    return h


def matrix_discriminant(h: np.ndarray) -> complex:
    """(h11 - h22)**2 + 4 h12 h21, the squared eigenvalue splitting."""
    return complex((h[0, 0] - h[1, 1]) ** 2 + 4.0 * h[0, 1] * h[1, 0])


def discriminant(params: EffectiveParams) -> complex:
    return matrix_discriminant(build_hamiltonian(params))


def c_product(u, v) -> complex:
    """Symmetric bilinear form u1 v1 + u2 v2 (no complex conjugation)."""
    u = np.asarray(u)
    v = np.asarray(v)
    return complex(np.sum(u * v, axis=0))


@dataclass(frozen=True)
class AdiabaticFrame:
    gamma_plus: complex
    gamma_minus: complex
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    theta: complex
    at_ep: bool
    # left eigenvectors; equal to phi_* for complex-symmetric matrices
    psi_plus: np.ndarray = field(repr=False, default=None)
    psi_minus: np.ndarray = field(repr=False, default=None)

    @property
    def split(self) -> complex:
        """gamma_plus - gamma_minus, i.e. the tracked square root of delta."""
        return self.gamma_plus - self.gamma_minus


def _principal_sqrt(z: complex) -> complex:
    return complex(np.sqrt(complex(z)))


def eigensystem(h: np.ndarray, reference: complex | None = None) -> AdiabaticFrame:
    """Eigenvalues and c-normalised eigenvectors of a 2x2 matrix.

    ``gamma_plus - gamma_minus`` is the square root of the discriminant on the
    principal branch, or, when ``reference`` is given, on the branch closest to
    ``reference``.  Eigenvectors follow the mixing-angle form
    ``(cos t/2, sin t/2)``, ``(-sin t/2, cos t/2)`` with
    ``tan t = -2 h12 / (h22 - h11)`` after symmetrising the off-diagonal
    couplings by a diagonal similarity.
    """
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix entries must be finite")
    h11, h12, h21, h22 = h[0, 0], h[0, 1], h[1, 0], h[1, 1]
    half_trace = 0.5 * (h11 + h22)
    delta = matrix_discriminant(h)
    root = _principal_sqrt(delta)
    if reference is not None and abs(root + reference) < abs(root - reference):
        root = -root
    gamma_plus = half_trace + 0.5 * root
    gamma_minus = half_trace - 0.5 * root

    scale = float(np.max(np.abs(h))) or 1.0
    at_ep = abs(delta) < EP_THRESHOLD * (2 * scale) ** 2

    if at_ep or (h12 == 0) != (h21 == 0):
        # coalescence, or one-sided coupling with no symmetrising similarity
        return _nullspace_frame(h, gamma_plus, gamma_minus, at_ep)

    if h12 == 0:
        k = 1.0 + 0j
        v = 0j
    else:
        k = np.sqrt(h21 / h12)
        v = h12 * k
    a = 0.5 * (h11 - h22)
    if a == 0:
        theta = complex(math.pi / 2) if v != 0 else 0j
    else:
        theta = complex(np.arctan(v / a))
    lam = a * np.cos(theta) + v * np.sin(theta)
    if abs(lam + 0.5 * root) < abs(lam - 0.5 * root):
        theta += math.pi
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    sym_plus = np.array([c, s])
    sym_minus = np.array([-s, c])
    # H = D S D^-1, D = diag(1, k): right vectors D phi, left vectors phi D^-1
    d = np.array([1.0, k])
    phi_plus, phi_minus = d * sym_plus, d * sym_minus
    psi_plus, psi_minus = sym_plus / d, sym_minus / d
    return AdiabaticFrame(
        complex(gamma_plus), complex(gamma_minus),
        phi_plus, phi_minus, complex(theta), bool(at_ep),
        psi_plus, psi_minus,
    )


def _nullspace_frame(h, gamma_plus, gamma_minus, at_ep):
    vectors = []
    # unnormalised; self-orthogonal at an EP
    for g in (gamma_plus, gamma_minus):
        # null vector of (H - g) built from whichever row is nonzero
        m = h - g * np.eye(2)
        row = m[0] if abs(m[0, 0]) + abs(m[0, 1]) >= abs(m[1, 0]) + abs(m[1, 1]) else m[1]
        vectors.append(np.array([-row[1], row[0]], dtype=complex))
    right = np.column_stack(vectors)
    left = right.T.copy() if at_ep else np.linalg.inv(right)
    return AdiabaticFrame(
        complex(gamma_plus), complex(gamma_minus),
        right[:, 0], right[:, 1], complex("nan"), bool(at_ep),
        left[0], left[1],
    )


def effective_from_microscopic(
    micro: "MicroscopicParams",
    delta: float | None = None,
    resonance_tol: float = 1e-12,
) -> EffectiveParams:
    """Reduce dipoles and field amplitudes to the effective knobs.

    The microscopic dipoles define the right enantiomer; the left one is
    obtained by negating them, which the returned params expose through
    ``handedness``.  ``delta`` defaults to E2 - E1 - omega3.  When d12.F3 is
    complex, state |2> is rephased so the Rabi frequency comes out real; the
    Raman coupling picks up the same phase and the cyclic element is unchanged.
    """
    if abs(micro.omega1 - micro.omega2 - micro.omega3) > resonance_tol * micro.omega1:
        raise ValueError("loop not closed: omega1 != omega2 + omega3")
    p1 = complex(np.dot(micro.d1E, micro.F1))
    p2 = complex(np.dot(micro.d2E, micro.F2))
    p3 = complex(np.dot(micro.d12, micro.F3))
    if p1 == 0 or p2 == 0 or p3 == 0:
        warnings.warn("a loop coupling vanishes; enantiosensitivity is lost", RuntimeWarning)
    rabi = -0.5 * p3
    raman = math.pi * p1 * p2.conjugate()
    # A complex Rabi frequency is made real by rephasing |2>; the phase is
    # reduced mod pi so that negating the dipoles still flips its sign.
    alpha = math.atan2(rabi.imag, rabi.real) if rabi != 0 else 0.0
    if alpha > math.pi / 2:
        alpha -= math.pi
    elif alpha <= -math.pi / 2:
        alpha += math.pi
    rotor = complex(math.cos(alpha), -math.sin(alpha))
    rabi *= rotor
    raman *= rotor
    if delta is None:
        delta = micro.E2 - micro.E1 - micro.omega3
    return EffectiveParams(
        gamma1=math.pi * abs(p1) ** 2,
        gamma2=math.pi * abs(p2) ** 2,
        delta=float(delta),
        omega12=rabi.real,
        raman=raman,
        handedness=Handedness.RIGHT,
    )


def microscopic_cyclic(micro: "MicroscopicParams") -> complex:
    return complex(
        np.conj(np.dot(micro.d1E, micro.F1))
        * np.dot(micro.d2E, micro.F2)
        * np.dot(micro.d12, micro.F3)
    )
