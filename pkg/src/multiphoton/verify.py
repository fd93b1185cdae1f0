"""Self-verification: cross-engine agreement, J-matrix properties,
normalization, and purity cross-checks on seeded random instances.

Backs the `multiphoton verify` subcommand; the test suite runs the same
checks at larger sample counts.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import bosonsampling
from .jmatrix import build_pure, min_eigenvalue
from .network import mode_list, random_unitary
from .permanent import permanent_naive, permanent_ryser
from .probability import output_distribution
from .spectral import IDEAL, DetectorModel, FiniteRankState, GaussianState, MixedState


def _well_conditioned(states, floor: float = 1e-5) -> bool:
    """Keep random spans away from numerical rank deficiency: restricted
    operators in a nearly singular span are only determined to eps/lambda."""
    from .spectral import gram_matrix

    ev = np.linalg.eigvalsh(gram_matrix(states))
    return bool(ev.min() > floor)


def random_instance(rng: np.random.Generator, kind: str = "gaussian",
                    max_modes: int = 5, max_photons: int = 4):
    """One random engine-equivalence instance: Haar network, single photon
    per occupied mode, photons and detectors of the requested flavor."""
    n = int(rng.integers(2, max_photons + 1))
    if kind == "mixed":
        n = min(n, 3)
    m = int(rng.integers(n, max_modes + 1))
    u = random_unitary(m, int(rng.integers(0, 2**31)))
    modes = sorted(rng.choice(m, size=n, replace=False).tolist())
    n_occ = tuple(1 if k in modes else 0 for k in range(m))

    if kind == "gaussian":
        for _ in range(50):
            photons = [
                GaussianState(omega=float(rng.normal(0.0, 0.5)), delta=1.0,
                              t=float(rng.normal(0.0, 0.8)),
                              pol=int(rng.integers(0, 2)) if rng.random() < 0.3 else 0)
                for _ in range(n)
            ]
            if _well_conditioned(photons):
                break
        det_kinds = ["ideal", "flat", "band"]
    elif kind == "finite":
        for _ in range(50):
            photons = []
            for _ in range(n):
                v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                photons.append(FiniteRankState(v / np.linalg.norm(v)))
            if _well_conditioned(photons):
                break
        det_kinds = ["ideal", "flat", "matrix"]
    elif kind == "mixed":
        for _ in range(50):
            photons = []
            for _ in range(n):
                k = int(rng.integers(2, 4))
                w = rng.dirichlet(np.ones(k))
                comps = [
                    (float(wi), GaussianState(omega=0.0, delta=1.0,
                                              t=float(rng.normal(0.0, 2.2))))
                    for wi in w
                ]
                photons.append(MixedState(comps))
            from .spectral import pure_components

            all_states = [s for p in photons for _, s in pure_components(p)]
            if _well_conditioned(all_states):
                break
        det_kinds = ["ideal", "flat", "band"]
    else:
        raise ValueError(kind)

    detectors = []
    for _ in range(m):
        choice = det_kinds[int(rng.integers(0, len(det_kinds)))]
        if choice == "ideal":
            detectors.append(IDEAL)
        elif choice == "flat":
            detectors.append(DetectorModel.flat(float(rng.uniform(0.5, 1.0))))
        elif choice == "band":
            detectors.append(DetectorModel.gaussian_band(
                center=float(rng.normal(0.0, 0.5)), width=float(rng.uniform(2.0, 6.0)),
                peak=float(rng.uniform(0.7, 1.0))))
        else:
            z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            q, _ = np.linalg.qr(z)
            ev = rng.uniform(0.3, 1.0, n)
            detectors.append(DetectorModel.operator((q * ev) @ q.conj().T))
    return u, n_occ, photons, detectors


def engine_discrepancy(u, n_occ, photons, detectors, engines=("jmatrix", "permanent", "general", "oracle")):
    """Max pairwise |P_a - P_b| over all outputs, plus the per-engine sums."""
    dists = {
        e: output_distribution(e, u, n_occ, photons=photons, detectors=detectors)
        for e in engines
    }
    worst = 0.0
    for a, b in itertools.combinations(engines, 2):
        for ra, rb in zip(dists[a].results, dists[b].results):
            worst = max(worst, abs(ra.p - rb.p))
    return worst, {e: d.total for e, d in dists.items()}


def run_checks(seed: int = 7, inject_fault: bool = False) -> list[dict]:
    rng = np.random.default_rng(seed)
    checks: list[dict] = []

    # engine equivalence + normalization, one instance per photon flavor
    for kind in ("gaussian", "finite", "mixed"):
        u, n_occ, photons, detectors = random_instance(rng, kind)
        worst, sums = engine_discrepancy(u, n_occ, photons, detectors)
        checks.append({
            "name": f"engine-equivalence-{kind}",
            "pass": bool(worst < 1e-9),
            "max_discrepancy": worst,
        })
        ideal_sum = output_distribution("jmatrix", u, n_occ, photons=photons).total
        checks.append({
            "name": f"normalization-ideal-{kind}",
            "pass": bool(abs(ideal_sum - 1.0) < 1e-9),
            "sum": ideal_sum,
        })

    # J-matrix Hermiticity/PSD on random dense builds
    worst_eig = 0.0
    for _ in range(5):
        u, n_occ, photons, detectors = random_instance(rng, "gaussian", max_photons=4)
        slot_dets = tuple(detectors[l] for l in mode_list(n_occ))
        jm = build_pure(photons, slot_dets, output_modes=mode_list(n_occ))
        if inject_fault:
            dense = jm.as_dense()
            dense[0, 1] = -dense[0, 1]  # break Hermiticity/PSD on purpose
            dense[1, 0] = dense[0, 1]
        worst_eig = min(worst_eig, min_eigenvalue(jm))
        herm = float(np.max(np.abs(jm.as_dense() - jm.as_dense().conj().T)))
        if herm > 0.0 and not inject_fault:
            worst_eig = -1.0
    checks.append({
        "name": "jmatrix-psd",
        "pass": bool(worst_eig >= -1e-9),
        "min_eigenvalue": worst_eig,
    })

    # purity closed form vs cycle-index route
    worst_gap = 0.0
    for n in (2, 3, 5, 8):
        for gamma in (0.1, 0.5, 0.9):
            params = bosonsampling.BSParams.from_gamma(n, gamma)
            a = bosonsampling.purity_closed(params).trace2
            b = bosonsampling.purity_direct(params).trace2
            worst_gap = max(worst_gap, abs(a - b))
    checks.append({
        "name": "purity-closed-vs-direct",
        "pass": bool(worst_gap < 1e-10),
        "max_gap": worst_gap,
    })

    # permanents: Ryser against the naive oracle
    worst_rel = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 8))
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        pn, pr = permanent_naive(a), permanent_ryser(a)
        worst_rel = max(worst_rel, abs(pn - pr) / max(abs(pn), 1e-30))
    checks.append({
        "name": "permanent-ryser-vs-naive",
        "pass": bool(worst_rel < 1e-10),
        "max_relative_error": worst_rel,
    })
    return checks
