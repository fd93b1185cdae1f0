"""Output-probability engines.

All engines compute P(m|n) for the same physical input and must agree; they
differ in the route:

* prob_jmatrix: the N!^2 quadratic form with the partial-indistinguishability
  matrix J;
* prob_permanent_basis: finite-basis sum of |per(U[n|m] . S(j))|^2 over basis
  tuples (single photon or vacuum per input mode);
* prob_general: the general ensemble formula with tensor coefficients C and
  permanents of Hadamard products U[n|m] . B(j, j');
* prob_classical: the Markov-chain form for maximally distinguishable photons;
* prob_ideal_indistinguishable: |per(U[n|m])|^2 / (mu mu);
* prob_oracle: direct expansion of both vacuum expectation values through the
  permutation-sum identity; slow, independent of every other engine, and the
  arbiter when they disagree.

Multiplicity factors mu(n), mu(m) live here and nowhere else.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    EngineError,
    SizeLimitError,
    UnsupportedInputError,
    ValidationError,
)
from .jmatrix import DENSE_CAP, JMatrix, build_mixed, build_pure
from .network import check_occupation, enumerate_outputs, mode_list, mu, submatrix
from .permanent import permanent_ryser, permanent_ryser_batch
from .spectral import (
    IDEAL,
    DetectorModel,
    MixedState,
    PureState,
    SpanBasis,
    gram_matrix,
    is_mixed,
    pure_components,
)
from .symgroup import permutation_array

log = logging.getLogger(__name__)

ENGINES = ("jmatrix", "permanent", "general", "classical", "ideal", "oracle")

NEGATIVE_CLAMP = -1e-9   # below this a negative probability is a hard error
IMAG_RESIDUAL_TOL = 1e-10
ORACLE_MAX_N = 5
JMATRIX_MAX_N = 8


@dataclass(frozen=True)
class ProbabilityResult:
    m: tuple[int, ...]
    p: float
    engine: str
    imag_residual: float = 0.0
    clamped: bool = False


def _finalize(raw: complex, m_occ: Sequence[int], engine: str,
              imag_tol: float = IMAG_RESIDUAL_TOL) -> ProbabilityResult:
    raw = complex(raw)
    if abs(raw.imag) > imag_tol * max(1.0, abs(raw.real)):
        raise EngineError(f"{engine}: imaginary residual {raw.imag:.3e} exceeds {imag_tol:g}")
    p = raw.real
    clamped = False
    if p < 0.0:
        if p < NEGATIVE_CLAMP:
            raise EngineError(f"{engine}: probability {p:.3e} below {NEGATIVE_CLAMP:g}")
        log.warning("%s: clamping probability %.3e to 0 for output %s",
                    engine, p, tuple(m_occ))
        p, clamped = 0.0, True
    return ProbabilityResult(tuple(int(x) for x in m_occ), float(p), engine,
                             imag_residual=abs(raw.imag), clamped=clamped)


def _sizes(n_occ, m_occ, modes: int):
    n_occ = check_occupation(n_occ, modes)
    m_occ = check_occupation(m_occ, modes)
    if sum(n_occ) != sum(m_occ):
        raise ValidationError(
            f"photon numbers differ: |n| = {sum(n_occ)}, |m| = {sum(m_occ)}"
        )
    return n_occ, m_occ, sum(n_occ)


def _path_products(u: np.ndarray, n_occ, m_occ) -> np.ndarray:
    """X_sigma = prod_alpha U[k_{sigma(alpha)}, l_alpha] over canonical order."""
    n = sum(n_occ)
    ks = np.asarray(mode_list(n_occ), dtype=np.intp)
    ls = np.asarray(mode_list(m_occ), dtype=np.intp)
    if n == 0:
        return np.ones(1, dtype=complex)
    perms = permutation_array(n)
    return np.prod(u[ks[perms], ls[None, :]], axis=1)


def path_amplitude_vector(jm: JMatrix, u: np.ndarray, n_occ, m_occ) -> np.ndarray:
    """Detector-reduced path amplitudes X_sigma = sqrt(J(s,s)) prod U."""
    x = _path_products(u, n_occ, m_occ)
    n = sum(n_occ)
    perms = permutation_array(n) if n else np.zeros((1, 0), dtype=np.intp)
    diag = np.array([jm.entry(p, p).real for p in perms])
    if np.any(diag < -1e-12):
        raise EngineError("negative diagonal J entry")
    return np.sqrt(np.clip(diag, 0.0, None)) * x


# -- J-matrix engine ---------------------------------------------------------


def prob_jmatrix(jm: JMatrix, u: np.ndarray, n_occ, m_occ) -> ProbabilityResult:
    """P = (1/(mu(m) mu(n))) X^dagger J X with X the path products."""
    n_occ, m_occ, n = _sizes(n_occ, m_occ, u.shape[0])
    if n > JMATRIX_MAX_N:
        raise SizeLimitError(f"prob_jmatrix capped at N <= {JMATRIX_MAX_N}, got {n}")
    if jm.n != n:
        raise ValidationError(f"J was built for N={jm.n}, instance has N={n}")
    ls = mode_list(m_occ)
    if not jm.context_matches(ls):
        raise ValidationError(
            f"J-matrix output context {jm.output_modes} does not match target output "
            f"modes {ls}; rebuild J for this output configuration"
        )
    x = _path_products(u, n_occ, m_occ)
    if n == 0:
        return _finalize(1.0 + 0j, m_occ, "jmatrix")
    if n <= DENSE_CAP or jm.dense is not None:
        dense = jm.as_dense()
        raw = np.vdot(x, dense @ x)
    else:
        raw = _quadratic_form_streamed(jm, x, n)
    raw /= mu(n_occ) * mu(m_occ)
    return _finalize(raw, m_occ, "jmatrix")


def _quadratic_form_streamed(jm: JMatrix, x: np.ndarray, n: int) -> complex:
    perms = permutation_array(n)
    nf = perms.shape[0]
    grams = getattr(jm, "_grams", None)
    acc = 0.0 + 0.0j
    if grams is not None:
        dets = jm.detectors
        for i in range(nf):
            row = np.ones(nf, dtype=complex)
            for alpha in range(n):
                g = grams[dets[alpha]]
                row *= g[perms[i, alpha], perms[:, alpha]]
            acc += np.conj(x[i]) * (row @ x)
        return acc
    for i in range(nf):
        row = np.array([jm.entry(perms[i], perms[j]) for j in range(nf)])
        acc += np.conj(x[i]) * (row @ x)
    return acc


# -- permanent-basis engine -----------------------------------------------------


def _output_blocks(ls: Sequence[int]) -> list[tuple[int, ...]]:
    """Consecutive slot blocks sharing an output mode (the l-list is sorted)."""
    blocks, start = [], 0
    for i in range(1, len(ls) + 1):
        if i == len(ls) or ls[i] != ls[start]:
            blocks.append(tuple(range(start, i)))
            start = i
    return blocks


def _canonical_tuples(r: int, blocks: list[tuple[int, ...]]):
    """Basis tuples that are nondecreasing within each output block, with the
    count of their distinct rearrangements.

    Permuting basis indices among slots of the same output mode permutes whole
    columns of the Hadamard product, so |per| is constant on those orbits; the
    weight makes the reduced sum equal to the full r^N tuple sum.
    """
    per_block = []
    for block in blocks:
        size = len(block)
        options = []
        for comb in itertools.combinations_with_replacement(range(r), size):
            weight = math.factorial(size)
            for c in Counter(comb).values():
                weight //= math.factorial(c)
            options.append((comb, weight))
        per_block.append(options)
    for chosen in itertools.product(*per_block):
        jt: list[int] = []
        weight = 1
        for comb, w in chosen:
            jt.extend(comb)
            weight *= w
        yield tuple(jt), weight


def _permanent_basis_pure(states: Sequence[PureState], slot_dets: Sequence[DetectorModel],
                          u: np.ndarray, n_occ, m_occ) -> float:
    n = len(states)
    ls = mode_list(m_occ)
    basis = SpanBasis(states)
    r = basis.rank
    usub = submatrix(u, n_occ, m_occ)
    sq = {det: basis.detector_sqrt(det) @ basis.coords for det in set(slot_dets)}  # (r, N)
    mats, weights = [], []
    for jt, w in _canonical_tuples(r, _output_blocks(ls)):
        s = np.empty((n, n), dtype=complex)
        for alpha in range(n):
            s[:, alpha] = sq[slot_dets[alpha]][jt[alpha], :]
        mats.append(usub * s)
        weights.append(w)
    pers = permanent_ryser_batch(np.asarray(mats))
    return float(np.sum(np.asarray(weights) * np.abs(pers) ** 2))


def prob_permanent_basis(photons: Sequence[PureState | MixedState],
                         detectors: Sequence[DetectorModel] | None,
                         u: np.ndarray, n_occ, m_occ) -> ProbabilityResult:
    """Finite-basis sum P = (1/mu(m)) sum_j |per(U[n|m] . S(j))|^2.

    Requires at most one photon per input mode. Mixed photons are averaged
    over their ensemble components (probability is linear in each photon's
    density operator)."""
    n_occ, m_occ, n = _sizes(n_occ, m_occ, u.shape[0])
    if any(c > 1 for c in n_occ):
        raise UnsupportedInputError(
            "prob_permanent_basis needs a single photon or vacuum per input mode; "
            "use prob_jmatrix or prob_general for multi-occupancy inputs"
        )
    if len(photons) != n:
        raise ValidationError(f"need {n} photons, got {len(photons)}")
    slot_dets = _slot_detectors(detectors, m_occ, u.shape[0])
    if n == 0:
        return _finalize(1.0 + 0j, m_occ, "permanent")
    total = 0.0
    for weight, states in _mode_correlated_draws(photons, n_occ):
        total += weight * _permanent_basis_pure(states, slot_dets, u, n_occ, m_occ)
    return _finalize(total / mu(m_occ), m_occ, "permanent")


def _slot_detectors(detectors: Sequence[DetectorModel] | None, m_occ,
                    modes: int) -> tuple[DetectorModel, ...]:
    """Expand per-mode detectors to the per-slot l-list."""
    if detectors is None:
        detectors = (IDEAL,) * modes
    detectors = tuple(detectors)
    if len(detectors) != modes:
        raise ValidationError(f"need one detector per mode: {len(detectors)} != {modes}")
    return tuple(detectors[l] for l in mode_list(m_occ))


def _mode_correlated_draws(photons: Sequence[PureState | MixedState], n_occ):
    """(weight, pure state list) draws with one ensemble draw per input mode:
    photons sharing a mode fluctuate together, different modes independently.
    For single-occupancy inputs this is the ordinary per-photon product."""
    ks = mode_list(n_occ)
    groups: dict[int, list[int]] = {}
    for slot, mode in enumerate(ks):
        groups.setdefault(mode, []).append(slot)
    blocks = list(groups.values())
    axes = [pure_components(photons[slots[0]]) for slots in blocks]
    for combo in itertools.product(*axes):
        weight = math.prod(w for w, _ in combo)
        slot_states: list[PureState] = [None] * len(ks)  # type: ignore[list-item]
        for slots, (_, drawn) in zip(blocks, combo):
            for s in slots:
                slot_states[s] = drawn
        yield weight, slot_states


# -- general ensemble engine -----------------------------------------------------


@dataclass
class GeneralEnsemble:
    """Spectral state of N photons as an ensemble of tensor coefficient
    arrays over the rank-r span basis."""

    basis: SpanBasis
    components: tuple[tuple[float, np.ndarray], ...]

    @property
    def n(self) -> int:
        return self.components[0][1].ndim

    @staticmethod
    def from_photons(photons: Sequence[PureState | MixedState],
                     n_occ: Sequence[int] | None = None) -> "GeneralEnsemble":
        """Product-form ensemble: every mode-correlated ensemble draw
        contributes C = c_1 x ... x c_N with weight prod p. Without an
        occupation vector every photon occupies its own mode (independent
        draws)."""
        if n_occ is None:
            n_occ = (1,) * len(photons)
        all_states: list[PureState] = []
        for p in photons:
            all_states.extend(s for _, s in pure_components(p))
        basis = SpanBasis(all_states)
        index_of: dict = {}
        pos = 0
        for p in photons:
            for _, s in pure_components(p):
                index_of.setdefault(s, pos)
                pos += 1
        comps = []
        for weight, states in _mode_correlated_draws(photons, n_occ):
            tensor = basis.coords[:, index_of[states[0]]]
            for s in states[1:]:
                tensor = np.multiply.outer(tensor, basis.coords[:, index_of[s]])
            comps.append((weight, np.asarray(tensor)))
        return GeneralEnsemble(basis, tuple(comps))

    def validate_symmetry(self, n_occ, tol: float = 1e-10) -> None:
        """The G-function symmetry: C invariant under permutations of tensor
        slots within each input-mode block."""
        blocks = []
        pos = 0
        for c in n_occ:
            if c:
                blocks.append(tuple(range(pos, pos + c)))
                pos += c
        for _, tensor in self.components:
            for block in blocks:
                for a, b in zip(block, block[1:]):
                    if not np.allclose(tensor, np.swapaxes(tensor, a, b), atol=tol):
                        raise ValidationError(
                            "ensemble tensor is not symmetric under the input-mode "
                            f"subgroup (slots {a}, {b})"
                        )


def prob_general(ensemble: GeneralEnsemble, detectors: Sequence[DetectorModel] | None,
                 u: np.ndarray, n_occ, m_occ) -> ProbabilityResult:
    """General multi-occupancy, entangled-spectral-ensemble probability:
    P = (1/(mu mu)) sum_i p_i sum_j |sum_j' C_{j'} per(U[n|m] . B(j, j'))|^2."""
    n_occ, m_occ, n = _sizes(n_occ, m_occ, u.shape[0])
    if ensemble.n != n:
        raise ValidationError(f"ensemble describes {ensemble.n} photons, instance has {n}")
    r = ensemble.basis.rank
    if r**n > 10**6:
        raise SizeLimitError(f"r^N = {r**n} exceeds the 1e6 cap")
    ensemble.validate_symmetry(n_occ)
    if n == 0:
        return _finalize(1.0 + 0j, m_occ, "general")
    slot_dets = _slot_detectors(detectors, m_occ, u.shape[0])
    ls = mode_list(m_occ)
    usub = submatrix(u, n_occ, m_occ)
    sqrt_ops = {det: ensemble.basis.detector_sqrt(det) for det in set(slot_dets)}
    jp_tuples = np.array(list(itertools.product(range(r), repeat=n)), dtype=np.intp)
    flat = [(w, np.asarray(c, dtype=complex).reshape(-1)) for w, c in ensemble.components]
    total = 0.0
    for jt, weight in _canonical_tuples(r, _output_blocks(ls)):
        # B[beta, alpha] = <j_alpha| sqrt(Gamma_{l_alpha}) |j'_beta>
        qgrid = np.stack([sqrt_ops[slot_dets[a]][jt[a], :] for a in range(n)], axis=1)  # (r, N)
        stack = usub[None, :, :] * qgrid[jp_tuples]  # (r^N, N, N)
        pers = permanent_ryser_batch(stack)
        for w, cvec in flat:
            amp = cvec @ pers
            total += weight * w * (amp.real**2 + amp.imag**2)
    total /= mu(n_occ) * mu(m_occ)
    return _finalize(total, m_occ, "general")


# -- closed-form engines ----------------------------------------------------------


def prob_classical(u: np.ndarray, n_occ, m_occ) -> ProbabilityResult:
    """Indistinguishable classical particles through the Markovian network
    |U|^2: P = per(|U[n|m]|^2) / mu(m)."""
    n_occ, m_occ, n = _sizes(n_occ, m_occ, u.shape[0])
    a = np.abs(submatrix(u, n_occ, m_occ)) ** 2
    raw = permanent_ryser(a).real / mu(m_occ)
    return _finalize(raw, m_occ, "classical")


def prob_ideal_indistinguishable(u: np.ndarray, n_occ, m_occ) -> ProbabilityResult:
    """P = |per(U[n|m])|^2 / (mu(m) mu(n))."""
    n_occ, m_occ, n = _sizes(n_occ, m_occ, u.shape[0])
    per = permanent_ryser(submatrix(u, n_occ, m_occ))
    raw = (per.real**2 + per.imag**2) / (mu(n_occ) * mu(m_occ))
    return _finalize(raw, m_occ, "ideal")


# -- brute-force oracle -----------------------------------------------------------


def prob_oracle(photons_or_ensemble, detectors: Sequence[DetectorModel] | None,
                u: np.ndarray, n_occ, m_occ) -> ProbabilityResult:
    """Direct expansion of P = Tr{rho Pi} via the permutation-sum identity for
    both vacuum expectation values.

    P = (1/(mu mu)) sum_{s1,s2} [prod_b U*_{k_{s1^-1(b)}, l_b} U_{k_{s2^-1(b)}, l_b}]
        x (spectral contraction of G against the detector sensitivities).

    Shares only the spectral data layer with the other engines; no J matrix,
    no permanents.
    """
    n_occ, m_occ, n = _sizes(n_occ, m_occ, u.shape[0])
    if n > ORACLE_MAX_N:
        raise SizeLimitError(f"prob_oracle capped at N <= {ORACLE_MAX_N}, got {n}")
    if n == 0:
        return _finalize(1.0 + 0j, m_occ, "oracle")
    slot_dets = _slot_detectors(detectors, m_occ, u.shape[0])
    ks = np.asarray(mode_list(n_occ), dtype=np.intp)
    ls = np.asarray(mode_list(m_occ), dtype=np.intp)
    perms = permutation_array(n)
    invs = np.argsort(perms, axis=1)
    x_inv = np.prod(u[ks[invs], ls[None, :]], axis=1)

    if isinstance(photons_or_ensemble, GeneralEnsemble):
        tmat = _oracle_tensor_contractions(photons_or_ensemble, slot_dets, invs, n)
    else:
        photons = list(photons_or_ensemble)
        if len(photons) != n:
            raise ValidationError(f"need {n} photons, got {len(photons)}")
        nf = perms.shape[0]
        tmat = np.zeros((nf, nf), dtype=complex)
        for weight, states in _mode_correlated_draws(photons, n_occ):
            grams = {d: gram_matrix(states, d) for d in set(slot_dets)}
            part = np.ones((nf, nf), dtype=complex)
            for b in range(n):
                g = grams[slot_dets[b]]
                col = invs[:, b]
                part *= g[col[:, None], col[None, :]]
            tmat += weight * part
    raw = np.vdot(x_inv, tmat @ x_inv) / (mu(n_occ) * mu(m_occ))
    return _finalize(raw, m_occ, "oracle")


def _oracle_tensor_contractions(ensemble: GeneralEnsemble,
                                slot_dets: Sequence[DetectorModel],
                                invs: np.ndarray, n: int) -> np.ndarray:
    r = ensemble.basis.rank
    if r > n:
        raise SizeLimitError(f"oracle ensemble path capped at rank <= N, got r={r}")
    dops = {det: ensemble.basis.detector_matrix(det) for det in set(slot_dets)}
    sqrts = {}
    for det, m in dops.items():
        ev, vec = np.linalg.eigh(m)
        sqrts[det] = (vec * np.sqrt(np.clip(ev, 0.0, None))) @ vec.conj().T
    nf = invs.shape[0]
    tmat = np.zeros((nf, nf), dtype=complex)
    for weight, tensor in ensemble.components:
        ws = np.empty((nf, r**n), dtype=complex)
        for i in range(nf):
            v = np.transpose(np.asarray(tensor, dtype=complex), axes=tuple(invs[i]))
            for axis in range(n):
                v = np.moveaxis(np.tensordot(sqrts[slot_dets[axis]], v, axes=(1, axis)), 0, axis)
            ws[i] = v.reshape(-1)
        tmat += weight * (ws.conj() @ ws.T)
    return tmat


# -- distribution sweep -------------------------------------------------------------


@dataclass
class DistributionResult:
    input: tuple[int, ...]
    engine: str
    results: list[ProbabilityResult] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(r.p for r in self.results))

    def to_dict(self) -> dict:
        return {
            "input": list(self.input),
            "outputs": [{"m": list(r.m), "p": r.p} for r in self.results],
            "sum": self.total,
            "engine": self.engine,
        }


def _one_output(engine: str, u, n_occ, m_occ, photons, detectors, ensemble):
    if engine == "classical":
        return prob_classical(u, n_occ, m_occ)
    if engine == "ideal":
        return prob_ideal_indistinguishable(u, n_occ, m_occ)
    if engine == "permanent":
        return prob_permanent_basis(photons, detectors, u, n_occ, m_occ)
    if engine == "general":
        ens = ensemble if ensemble is not None else GeneralEnsemble.from_photons(photons, n_occ)
        return prob_general(ens, detectors, u, n_occ, m_occ)
    if engine == "oracle":
        src = ensemble if ensemble is not None else photons
        return prob_oracle(src, detectors, u, n_occ, m_occ)
    if engine == "jmatrix":
        slot_dets = _slot_detectors(detectors, m_occ, u.shape[0])
        ls = mode_list(m_occ)
        ks = mode_list(n_occ)
        if any(is_mixed(p) for p in photons):
            jm = build_mixed(photons, slot_dets, output_modes=ls, input_modes=ks)
        else:
            jm = build_pure(photons, slot_dets, output_modes=ls, input_modes=ks)
        return prob_jmatrix(jm, u, n_occ, m_occ)
    raise ValidationError(f"unknown engine {engine!r}; choose from {ENGINES}")


def output_distribution(engine: str, u: np.ndarray, n_occ, *,
                        photons: Sequence[PureState | MixedState] | None = None,
                        detectors: Sequence[DetectorModel] | None = None,
                        ensemble: GeneralEnsemble | None = None,
                        threads: int = 1) -> DistributionResult:
    """Probabilities of every output configuration |m| = N, in canonical
    (descending lexicographic) output order.

    Deterministic for any thread count: results are merged in output order.
    """
    n_occ = check_occupation(n_occ, u.shape[0])
    n = sum(n_occ)
    if engine not in ENGINES:
        raise ValidationError(f"unknown engine {engine!r}; choose from {ENGINES}")
    if engine not in ("classical", "ideal") and photons is None and ensemble is None:
        raise ValidationError(f"engine {engine!r} needs spectral data")
    if photons is not None and len(photons) != n:
        raise ValidationError(f"photon list length {len(photons)} != |n| = {n}")
    outputs = enumerate_outputs(u.shape[0], n)
    dist = DistributionResult(input=n_occ, engine=engine)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_one_output, engine, u, n_occ, m_occ, photons, detectors, ensemble)
                for m_occ in outputs
            ]
            dist.results = [f.result() for f in futures]
    else:
        dist.results = [
            _one_output(engine, u, n_occ, m_occ, photons, detectors, ensemble)
            for m_occ in outputs
        ]
    return dist


def normalization_report(engine: str, u: np.ndarray, n_occ, *,
                         photons=None, detectors=None, ensemble=None,
                         threads: int = 1) -> float:
    """Sum of P(m|n) over all outputs.

    1 for ideal detectors; below 1 for lossy detectors (the post-selected sum
    is reported as-is, renormalization is the caller's decision).
    """
    return output_distribution(engine, u, n_occ, photons=photons, detectors=detectors,
                               ensemble=ensemble, threads=threads).total
