"""Single-photon spectral states, detector models, detector-weighted overlaps,
Gram matrices, span orthonormalization, and mixed states.

Two state representations are supported and never mixed within one instance:

* Gaussian wave packets (center frequency, width, arrival time, polarization),
  for which all ideal/flat/Gaussian-band detector overlaps are closed-form
  frequency integrals;
* finite-rank coefficient vectors over an abstract orthonormal internal
  basis, for which detectors are Hermitian operators on that basis.

Everything downstream works in the restriction of the detector operator to
the span of the input states: the detector enters only between two input
states, so projecting it onto their span changes nothing while turning all
integrals into small Hermitian matrix algebra.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IncompatibleRepresentationError,
    ValidationError,
)

RANK_TOL = 1e-10  # singular values below RANK_TOL * largest are dropped


# -- states -------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianState:
    """Normalized Gaussian spectral amplitude
    phi(w) = (2 pi delta^2)^(-1/4) exp(i w t - (w - omega)^2 / (4 delta^2))
    with a discrete polarization index."""

    omega: float
    delta: float
    t: float = 0.0
    pol: int = 0

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError(f"spectral width must be positive, got {self.delta}")
        if self.pol not in (0, 1):
            raise ValidationError(f"polarization index must be 0 or 1, got {self.pol}")

    def delayed(self, tau: float) -> "GaussianState":
        return GaussianState(self.omega, self.delta, self.t + tau, self.pol)


class FiniteRankState:
    """Unit coefficient vector over an orthonormal internal basis."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[complex]):
        vec = np.asarray(coeffs, dtype=complex).reshape(-1)
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-8:
            raise ValidationError(f"finite-rank state must have unit norm, got {norm}")
        vec = vec / norm
        vec.setflags(write=False)
        object.__setattr__(self, "coeffs", vec)

    @property
    def rank(self) -> int:
        return self.coeffs.size

    def __repr__(self) -> str:
        return f"FiniteRankState({np.round(self.coeffs, 6)})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FiniteRankState)
            and self.coeffs.shape == other.coeffs.shape
            and bool(np.all(self.coeffs == other.coeffs))
        )

    def __hash__(self) -> int:
        return hash(self.coeffs.tobytes())


PureState = GaussianState | FiniteRankState


# -- detectors ------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorModel:
    """Spectral sensitivity of a number-resolving detector.

    kinds: 'ideal' (unit sensitivity), 'flat' (constant eta), 'gaussianBand'
    (peak * exp(-(w-center)^2/(2 width^2))), 'matrix' (Hermitian operator on
    the finite-rank basis with eigenvalues in [0, 1]).
    """

    kind: str = "ideal"
    eta: float = 1.0
    center: float = 0.0
    width: float = 1.0
    peak: float = 1.0
    entries: tuple | None = None  # hashable storage for the 'matrix' kind

    @staticmethod
    def ideal() -> "DetectorModel":
        return DetectorModel("ideal")

    @staticmethod
    def flat(eta: float) -> "DetectorModel":
        if not 0.0 <= eta <= 1.0:
            raise ValidationError(f"flat efficiency must lie in [0, 1], got {eta}")
        return DetectorModel("flat", eta=float(eta))

    @staticmethod
    def gaussian_band(center: float, width: float, peak: float = 1.0) -> "DetectorModel":
        if width <= 0:
            raise ValidationError(f"band width must be positive, got {width}")
        if not 0.0 < peak <= 1.0:
            raise ValidationError(f"band peak must lie in (0, 1], got {peak}")
        return DetectorModel("gaussianBand", center=float(center), width=float(width), peak=float(peak))

    @staticmethod
    def operator(matrix: np.ndarray) -> "DetectorModel":
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("detector operator must be a square matrix")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValidationError("detector operator must be Hermitian")
        ev = np.linalg.eigvalsh(m)
        if ev.min() < -1e-10 or ev.max() > 1.0 + 1e-10:
            raise ValidationError(f"detector eigenvalues must lie in [0, 1], got [{ev.min()}, {ev.max()}]")
        return DetectorModel("matrix", entries=tuple(tuple(z for z in row) for row in m))

    @property
    def matrix(self) -> np.ndarray:
        if self.kind != "matrix":
            raise ValidationError("only 'matrix' detectors carry an explicit operator")
        return np.array(self.entries, dtype=complex)

    @property
    def is_ideal(self) -> bool:
        return self.kind == "ideal" or (self.kind == "flat" and self.eta == 1.0)


IDEAL = DetectorModel.ideal()


# -- overlaps -------------------------------------------------------------------

def _gauss_quadratic(a: GaussianState, b: GaussianState, det: DetectorModel) -> complex:
    """Closed form of <a| Gamma |b> for Gaussian states.

    The integrand is a product of Gaussians, so the frequency integral is
    prefactor * sqrt(pi/A) * exp(B^2/(4A) + C) with A, B, C read off from
    the combined exponent."""
    if a.pol != b.pol:
        return 0.0 + 0.0j
    va, vb = a.delta**2, b.delta**2
    aa = 1.0 / (4.0 * va) + 1.0 / (4.0 * vb)
    bb = 1j * (b.t - a.t) + a.omega / (2.0 * va) + b.omega / (2.0 * vb)
    cc = -(a.omega**2) / (4.0 * va) - (b.omega**2) / (4.0 * vb)
    pref = (2.0 * np.pi * va) ** -0.25 * (2.0 * np.pi * vb) ** -0.25
    if det.kind == "flat":
        pref *= det.eta
    elif det.kind == "gaussianBand":
        w2 = det.width**2
        aa += 1.0 / (2.0 * w2)
        bb += det.center / w2
        cc += -(det.center**2) / (2.0 * w2)
        pref *= det.peak
    return pref * np.sqrt(np.pi / aa) * np.exp(bb * bb / (4.0 * aa) + cc)


def overlap(a: PureState, det: DetectorModel, b: PureState) -> complex:
    """Detector-weighted overlap <a| Gamma |b>."""
    if isinstance(a, GaussianState) and isinstance(b, GaussianState):
        if det.kind == "matrix":
            raise IncompatibleRepresentationError(
                "matrix detectors act on finite-rank states, not Gaussian ones"
            )
        return complex(_gauss_quadratic(a, b, det))
    if isinstance(a, FiniteRankState) and isinstance(b, FiniteRankState):
        if a.rank != b.rank:
            raise IncompatibleRepresentationError(
                f"finite-rank states live in different spaces ({a.rank} vs {b.rank})"
            )
        if det.kind in ("ideal", "flat"):
            return complex(det.eta if det.kind == "flat" else 1.0) * complex(
                np.vdot(a.coeffs, b.coeffs)
            )
        if det.kind == "matrix":
            m = det.matrix
            if m.shape[0] != a.rank:
                raise IncompatibleRepresentationError(
                    f"detector operator is {m.shape[0]}-dimensional, states are {a.rank}"
                )
            return complex(np.vdot(a.coeffs, m @ b.coeffs))
        raise IncompatibleRepresentationError(
            f"detector kind {det.kind!r} has no action on finite-rank states"
        )
    raise IncompatibleRepresentationError(
        f"cannot overlap {type(a).__name__} with {type(b).__name__}"
    )


def gram_matrix(states: Sequence[PureState], det: DetectorModel | None = None) -> np.ndarray:
    """Hermitian PSD matrix of detector-weighted pairwise overlaps."""
    det = det or IDEAL
    n = len(states)
    g = np.empty((n, n), dtype=complex)
    for i in range(n):
        g[i, i] = overlap(states[i], det, states[i]).real
        for j in range(i + 1, n):
            val = overlap(states[i], det, states[j])
            g[i, j] = val
            g[j, i] = np.conj(val)
    return g


# -- span orthonormalization ------------------------------------------------------

class SpanBasis:
    """Orthonormal basis of the span of a state list under a (possibly
    detector-weighted) inner product, built from the Gram matrix.

    chi_j = sum_a mixing[a, j] * phi_a,    phi_b = sum_j coords[j, b] * chi_j.
    """

    def __init__(self, states: Sequence[PureState], kernel: DetectorModel | None = None,
                 rank_tol: float = RANK_TOL):
        self.states = tuple(states)
        self.kernel = kernel or IDEAL
        self.gram = gram_matrix(self.states, self.kernel)
        w, vec = np.linalg.eigh(self.gram)
        keep = w > rank_tol * max(w.max(), 0.0)
        self.rank = int(np.count_nonzero(keep))
        if self.rank == 0:
            raise ValidationError("state list spans rank 0 under the given kernel")
        mixing = vec[:, keep] / np.sqrt(w[keep])
        # one refinement pass: near-degenerate Grams leave the candidate basis
        # orthonormal only to ~eps/lambda_min, which would push restricted
        # detector eigenvalues outside [0, 1]
        b = mixing.conj().T @ self.gram @ mixing
        bw, bv = np.linalg.eigh(0.5 * (b + b.conj().T))
        mixing = mixing @ ((bv / np.sqrt(bw)) @ bv.conj().T)
        self.mixing = mixing
        self.coords = self.mixing.conj().T @ self.gram
        self._det_cache: dict[DetectorModel, np.ndarray] = {}
        self._sqrt_cache: dict[DetectorModel, np.ndarray] = {}

    @property
    def rank_deficient(self) -> bool:
        return self.rank < len(self.states)

    def state_vectors(self) -> list[np.ndarray]:
        """Coefficient vectors of the original states in the new basis."""
        return [self.coords[:, b].copy() for b in range(len(self.states))]

    def as_finite_rank(self) -> list[FiniteRankState]:
        return [FiniteRankState(v) for v in self.state_vectors()]

    def detector_matrix(self, det: DetectorModel) -> np.ndarray:
        """Restriction of the detector operator to the span: Hermitian with
        eigenvalues in [0, 1] up to roundoff."""
        cached = self._det_cache.get(det)
        if cached is None:
            g = gram_matrix(self.states, det)
            m = self.mixing.conj().T @ g @ self.mixing
            cached = 0.5 * (m + m.conj().T)
            self._det_cache[det] = cached
        return cached

    def detector_sqrt(self, det: DetectorModel) -> np.ndarray:
        """Hermitian square root of the restricted detector operator.

        Note: this is sqrt(P Gamma P), not P sqrt(Gamma) P; only the former
        reproduces the exact detector-weighted overlaps after one basis
        insertion."""
        cached = self._sqrt_cache.get(det)
        if cached is None:
            m = self.detector_matrix(det)
            ev, vec = np.linalg.eigh(m)
            # near-null span directions carry O(eps / lambda_min) noise in the
            # restricted matrix elements; clip into the physical range and
            # fail only on genuine violations
            if ev.min() < -1e-6 or ev.max() > 1.0 + 1e-6:
                raise ValidationError(
                    f"restricted detector eigenvalues outside [0, 1]: [{ev.min()}, {ev.max()}]"
                )
            ev = np.clip(ev, 0.0, 1.0)
            cached = (vec * np.sqrt(ev)) @ vec.conj().T
            self._sqrt_cache[det] = cached
        return cached


def orthonormalize(states: Sequence[PureState], kernel: DetectorModel | None = None,
                   rank_tol: float = RANK_TOL) -> SpanBasis:
    """Orthonormal basis of the span under the kernel-weighted inner product.

    A numerically singular Gram matrix is not an error: the rank is reduced
    and reported via ``SpanBasis.rank`` / ``rank_deficient``.
    """
    return SpanBasis(states, kernel, rank_tol)


# -- mixed states -----------------------------------------------------------------

class MixedState:
    """Single-photon mixed spectral state as a weighted ensemble of pure
    states; fluctuating-parameter families enter through a quadrature rule."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[tuple[float, PureState]]):
        comps = [(float(w), s) for w, s in components]
        if not comps:
            raise ValidationError("mixed state needs at least one component")
        if any(w < 0 for w, _ in comps):
            raise ValidationError("ensemble weights must be nonnegative")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"ensemble weights must sum to 1 within 1e-12, got {total}")
        self.components = tuple(comps)

    @staticmethod
    def ensemble(pairs: Iterable[tuple[float, PureState]]) -> "MixedState":
        return MixedState(pairs)

    @staticmethod
    def pure(state: PureState) -> "MixedState":
        return MixedState([(1.0, state)])

    @staticmethod
    def from_gaussian_parameter(constructor, mean: float, spread: float,
                                nodes: int = 32) -> "MixedState":
        """Fluctuating-parameter family: ``constructor(x)`` builds the pure
        state for parameter value x, normally distributed with the given mean
        and spread; discretized by Gauss-Hermite quadrature (exact-class for
        the Gaussian weight; 32 nodes by default, convergence checked in
        tests against 64)."""
        if spread < 0:
            raise ValidationError("parameter spread must be nonnegative")
        if spread == 0:
            return MixedState.pure(constructor(mean))
        x, w = np.polynomial.hermite.hermgauss(nodes)
        weights = w / math.sqrt(math.pi)
        weights = weights / weights.sum()  # unit mass within 1e-12 guaranteed
        values = mean + math.sqrt(2.0) * spread * x
        return MixedState(
            [(float(wi), constructor(float(v))) for wi, v in zip(weights, values)]
        )

    @staticmethod
    def gaussian_time_jitter(omega: float, delta: float, time_spread: float, *,
                             mean_time: float = 0.0, pol: int = 0,
                             nodes: int = 32) -> "MixedState":
        """Gaussian wave packet with normally distributed arrival time."""
        return MixedState.from_gaussian_parameter(
            lambda t: GaussianState(omega, delta, t, pol),
            mean_time, time_spread, nodes=nodes,
        )


def pure_components(state: PureState | MixedState) -> tuple[tuple[float, PureState], ...]:
    if isinstance(state, MixedState):
        return state.components
    return ((1.0, state),)


def is_mixed(state: PureState | MixedState) -> bool:
    return isinstance(state, MixedState) and len(state.components) > 1


def gk_trace(rho: PureState | MixedState, det: DetectorModel, k: int) -> float:
    """Tr{(sqrt(Gamma) rho sqrt(Gamma))^k} for a single-photon state.

    Evaluated on the span of the ensemble components: the trace equals
    Tr{(W^(1/2) G W^(1/2))^k} with W the ensemble weights and G the
    detector-weighted component Gram matrix. g_1 is the one-photon
    detection probability; an ideal detector gives g_1 = 1 exactly.
    """
    if k < 1:
        raise ValidationError("need k >= 1")
    comps = pure_components(rho)
    weights = np.array([w for w, _ in comps])
    states = [s for _, s in comps]
    g = gram_matrix(states, det)
    b = (np.sqrt(weights)[:, None] * g) * np.sqrt(weights)[None, :]
    ev = np.linalg.eigvalsh(b)
    val = float(np.sum(np.clip(ev, 0.0, None) ** k))
    return min(max(val, 0.0), 1.0) if val <= 1.0 + 1e-9 else val


# -- JSON I/O ---------------------------------------------------------------------

def photon_from_dict(entry: dict) -> PureState:
    if "gaussian" in entry:
        g = entry["gaussian"]
        try:
            return GaussianState(
                omega=float(g["omega"]), delta=float(g["delta"]),
                t=float(g.get("t", 0.0)), pol=int(g.get("pol", 0)),
            )
        except KeyError as exc:
            raise ValidationError(f"gaussian photon entry missing field {exc}") from exc
    if "coeffs" in entry:
        return FiniteRankState([complex(p[0], p[1]) for p in entry["coeffs"]])
    raise ValidationError(f"photon entry must contain 'gaussian' or 'coeffs': {entry}")


def load_photons(path: str) -> list[PureState]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ValidationError("photon file must be a nonempty JSON list")
    return [photon_from_dict(e) for e in data]


def detector_from_dict(entry: dict) -> DetectorModel:
    kind = entry.get("kind")
    if kind == "ideal":
        return DetectorModel.ideal()
    if kind == "flat":
        return DetectorModel.flat(float(entry["eta"]))
    if kind == "gaussianBand":
        return DetectorModel.gaussian_band(
            float(entry["center"]), float(entry["width"]), float(entry.get("peak", 1.0))
        )
    if kind == "matrix":
        m = np.array([[complex(p[0], p[1]) for p in row] for row in entry["entries"]])
        return DetectorModel.operator(m)
    raise ValidationError(f"unknown detector kind: {kind!r}")


def load_detectors(path: str) -> list[DetectorModel]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ValidationError("detector file must be a nonempty JSON list")
    return [detector_from_dict(e) for e in data]
