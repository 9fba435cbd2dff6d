"""Residual certificates for the axioms on a (model, Hamiltonian) pair.

Membership "X in S" is measured as the HS norm of the part of the windowed
``W X W`` outside the (windowed) span S, divided by a natural size of X:
``2 ||z||_op ||W bdot W||_HS`` for ``X = [z, bdot]``.  A check passes when
every such relative residual is below its tolerance (default 1e-8).

Probes.  Every map ``b -> [z, bdot]`` and ``a -> [adot, b^o]`` obeys a
Leibniz rule whose extra terms stay inside the target span, so it suffices
to probe generators; on exact (finite or cyclic) models a few seeded random
span elements are added as a cross-check.
"""
from __future__ import annotations

import numpy as np

from .algebra import PreconditionError, commutant_of, compare_subspaces
from .dynamics import velocity
from .kron import KronSum, kron_op_norm
from .models import ModelBundle, MoyalBundle
from .numerics import dagger, hermitian_part, hs_norm, op_norm, random_hermitian
from .report import CheckReport

DEFAULT_TOL = 1e-8
_FLOOR = 1e-12


def _opn(X) -> float:
    return kron_op_norm(X) if isinstance(X, KronSum) else op_norm(X)


def _hsn(X) -> float:
    return X.hs_norm() if isinstance(X, KronSum) else hs_norm(X)


def _whs(bundle, X) -> float:
    """HS norm of ``W X W``: the size of ``X`` where membership is measured.

    The full-space norm would count truncation-boundary rows, which the
    window deliberately excludes, and so understate a genuine violation.
    """
    return _hsn(bundle.compress(X))


def _random_elements(basis, count: int, seed: int, prefix: str):
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        c = rng.normal(size=basis.rank) + 1j * rng.normal(size=basis.rank)
        out.append((f"{prefix}rand{k}", (basis.vectors @ c).reshape(basis.dim, basis.dim)))
    return out


def algebra_probes(bundle: ModelBundle, samples: int = 2, seed: int = 0):
    items = list(bundle.rep.closed_generators().items())
    if bundle.exact and samples:
        items += _random_elements(bundle.algebra_basis(), samples, seed, "")
    return items


def opposite_probes(bundle: ModelBundle, samples: int = 2, seed: int = 0):
    items = list(bundle.rep.closed_generators(bundle.rep.opposite_gens()).items())
    if bundle.exact and samples:
        from .algebra import opposite_span

        items += _random_elements(opposite_span(bundle.rep), samples, seed + 1, "o")
    return items


def center_probes(bundle: ModelBundle):
    return bundle.center_probes()


def _rel(abs_res: float, ref: float, apriori: float) -> float:
    """``abs_res`` relative to the actual commutator scale ``ref``.

    When ``ref`` is tiny (a conserved probe) the a-priori bound
    ``apriori`` (times 1e-6) keeps round-off from looking like a violation.
    """
    return abs_res / max(ref, 1e-6 * apriori, _FLOOR)


def weak_uncertainty_residuals(bundle: ModelBundle, H, samples: int = 2, seed: int = 0, lemma: bool = True):
    """``[(label, absolute, relative)]`` for ``[z, bdot] in A`` and its consequences.

    With ``lemma`` set, also ``[a, zdot] in A`` and ``[z', zdot] in Z``.
    """
    out = []
    Hn = _opn(H)
    if isinstance(bundle, MoyalBundle):
        pairs = bundle.weak_pairs()
        zs = [("I", bundle.identity())]
        bs = []
    else:
        zs = center_probes(bundle)
        bs = algebra_probes(bundle, samples, seed)
        pairs = [(z, b) for z in zs for b in bs]
    for (zl, z), (bl, b) in pairs:
        bd = velocity(bundle, H, b)
        X = z @ bd - bd @ z
        ab, _ = bundle.membership(X, "algebra")
        zn = _opn(z)
        out.append((f"[{zl},d/dt {bl}]", ab, _rel(ab, 2 * zn * _whs(bundle, bd), 4 * zn * Hn * _whs(bundle, b))))
    if lemma:
        for zl, z in zs:
            zd = velocity(bundle, H, z)
            for al, a in (bs or [(zl, z)]):
                X = a @ zd - zd @ a
                ab, _ = bundle.membership(X, "algebra")
                an = _opn(a)
                out.append((f"[{al},d/dt {zl}]", ab, _rel(ab, 2 * an * _whs(bundle, zd), 4 * an * Hn * _whs(bundle, z))))
            for zl2, z2 in zs:
                X = z2 @ zd - zd @ z2
                ab, _ = bundle.membership(X, "center")
                zn = _opn(z2)
                out.append((f"[{zl2},d/dt {zl}]:center", ab, _rel(ab, 2 * zn * _whs(bundle, zd), 4 * zn * Hn * _whs(bundle, z))))
    return out


def check_weak_uncertainty(bundle: ModelBundle, H, tol: float = DEFAULT_TOL, samples: int = 2,
                           seed: int = 0, lemma: bool = True) -> CheckReport:
    res = weak_uncertainty_residuals(bundle, H, samples, seed, lemma)
    notes = [f"span degree cap {bundle.span_cap}",
             "localizability holds trivially: every model acts on a free module"]
    if isinstance(bundle, MoyalBundle):
        notes.append("center is trivial; probes are the coordinates, [x_l, xdot_k] in A")
    return CheckReport("weak_uncertainty", bundle.label, [(lab, rel) for lab, _, rel in res], tol,
                       bundle.window_params(), notes)


def strong_uncertainty_residuals(bundle: ModelBundle, H, samples: int = 2, seed: int = 0):
    """``[(label, absolute, relative)]`` for ``[adot, b^o] in A (x) A^o``."""
    if isinstance(bundle, MoyalBundle):
        As = list(bundle.rep.generators.items())
        Os = bundle.opposite_probes()
    else:
        if bundle.rep.j_conj is None and bundle.rep.opposite_generators is None:
            raise PreconditionError("strong uncertainty needs an opposite algebra")
        As = algebra_probes(bundle, samples, seed)
        Os = opposite_probes(bundle, samples, seed)
    out = []
    Hn = _opn(H)
    for al, a in As:
        ad = velocity(bundle, H, a)
        adn, an = _whs(bundle, ad), _whs(bundle, a)
        for bl, b in Os:
            X = ad @ b - b @ ad
            ab, _ = bundle.membership(X, "bimodule")
            bn = _opn(b)
            out.append((f"[d/dt {al},{bl}]", ab, _rel(ab, 2 * bn * adn, 4 * bn * Hn * an)))
    return out


def check_strong_uncertainty(bundle: ModelBundle, H, tol: float = DEFAULT_TOL, samples: int = 2,
                             seed: int = 0) -> CheckReport:
    res = strong_uncertainty_residuals(bundle, H, samples, seed)
    notes = [f"bimodule span degree cap {2 * bundle.span_cap}"]
    if isinstance(bundle, MoyalBundle):
        notes.append("left and right multiplications span all operators at finite Fock cutoff")
    return CheckReport("strong_uncertainty", bundle.label, [(lab, rel) for lab, _, rel in res], tol,
                       bundle.window_params(), notes)


def check_weak_strong_equivalence(bundle: ModelBundle, trials: int = 20, seed: int = 0,
                                  tol: float = DEFAULT_TOL) -> CheckReport:
    """Weak and strong verdicts agree for random Hamiltonians on a finite sum.

    The hypothesis ``A (x) A^o = Z(A)'`` is verified first.  Trials alternate
    between Hamiltonians drawn from ``A (x) A^o`` (both checks should pass)
    and generic Hermitian matrices.
    """
    if bundle.family != "finite_sum":
        raise PreconditionError("weak/strong equivalence is a finite-dimensional statement")
    bim = bundle.bimodule_basis()
    zprime = commutant_of(bundle.center_basis().matrices(), bundle.dim)
    hyp = compare_subspaces(bim, zprime)
    residuals = [("hypothesis", hyp.residual)]
    notes = [f"dim A(x)A^o = {hyp.dimension_a}, dim Z' = {hyp.dimension_b}"]
    report = CheckReport("weak_strong_equivalence", bundle.label, residuals, tol, bundle.window_params(), notes)
    report.trials = []
    if not hyp.equal:
        report.verdict_override = "fail"
        notes.append("hypothesis failed; no trials run")
        return report
    rng = np.random.default_rng(seed)
    n = bundle.dim
    for t in range(trials):
        if t % 2 == 0:
            c = rng.normal(size=bim.rank) + 1j * rng.normal(size=bim.rank)
            H = hermitian_part((bim.vectors @ c).reshape(n, n))
            kind = "bimodule"
        else:
            H = random_hermitian(n, rng)
            kind = "generic"
        w = check_weak_uncertainty(bundle, H, tol, lemma=False).residual_max
        s = check_strong_uncertainty(bundle, H, tol).residual_max
        agree = (w < tol) == (s < tol)
        report.trials.append({"kind": kind, "weak": w, "strong": s, "agree": agree})
        residuals.append((f"trial{t}:{kind}:disagreement", 0.0 if agree else 1.0))
        notes.append(f"trial {t} ({kind}): weak {w:.3e}, strong {s:.3e}")
    return report


def _hermitian_samples(bundle: ModelBundle, samples: int, seed: int):
    """``I`` plus seeded Hermitian samples.

    Unwindowed exact models draw from the whole span.  Windowed models draw
    combinations of generator words of degree at most ``min(margin, 2)``
    (at least one), since a word of degree ``k`` only stays clear of the
    truncation boundary when ``k`` is within the window margin.
    """
    rng = np.random.default_rng(seed)
    n = bundle.dim
    out = [("I", np.eye(n, dtype=complex))]
    if bundle.exact and bundle.window is None:
        basis = bundle.algebra_basis()
        for k in range(samples):
            c = rng.normal(size=basis.rank) + 1j * rng.normal(size=basis.rank)
            out.append((f"h{k}", hermitian_part((basis.vectors @ c).reshape(n, n))))
    else:
        gens = list(bundle.rep.closed_generators().values())
        degree = min(max(bundle.spec.window_margin, 1), 2)
        words = list(gens)
        if degree == 2:
            words += [g @ h for g in gens for h in gens]
        herm = []
        for g in words:
            herm += [g + dagger(g), 1j * (g - dagger(g))]
        herm = [h for h in herm if hs_norm(h) > 1e-12]
        for k in range(samples):
            c = rng.normal(size=len(herm))
            out.append((f"h{k}", sum(ci * h for ci, h in zip(c, herm))))
    return out


def check_positivity_nontriviality(bundle: ModelBundle, H, samples: int = 32, seed: int = 0,
                                   tol: float = 1e-9) -> CheckReport:
    """``-i[a, adot] >= 0`` and ``[a, adot] = 0 => adot = 0`` on sampled Hermitian ``a``.

    Both are measured on the window.  Eigenvalues are compared with
    ``-tol ||H|| ||a||^2``; the exact-zero premise of the second clause is
    replaced by ``||[a, adot]|| < tol`` and the conclusion by
    ``||adot|| < 10 tol`` (same scale).
    """
    if isinstance(bundle, MoyalBundle):
        raise PreconditionError("positivity sampling runs on dense models")
    Hn = max(op_norm(bundle.compress(H)), 1.0)
    residuals = []
    for lab, a in _hermitian_samples(bundle, samples, seed):
        ad = velocity(bundle, H, a)
        C = a @ ad - ad @ a
        G = bundle.compress(-1j * C)
        lam = float(np.linalg.eigvalsh(0.5 * (G + dagger(G)))[0])
        scale = Hn * max(op_norm(a), 1.0) ** 2
        residuals.append((f"positivity:{lab}", max(0.0, -lam) / scale))
        if op_norm(bundle.compress(C)) < tol * scale:
            residuals.append((f"nontriviality:{lab}", op_norm(bundle.compress(ad)) / (10 * scale)))
    notes = ["nontriviality premise [a, adot] = 0 is tested as ||[a, adot]|| < tol"]
    return CheckReport("positivity_nontriviality", bundle.label, residuals, tol, bundle.window_params(), notes)


def reality_residuals(bundle: ModelBundle, H, samples: int = 2, seed: int = 0):
    """``J (i[H, a]) J^{-1} + i[H, J a J^{-1}]``, which equals ``i[H - J H J^{-1}, J a J^{-1}]``."""
    rep = bundle.rep
    if rep.j_conj is None:
        raise PreconditionError("reality condition needs J")
    Hn = max(op_norm(H), 1e-300)
    out = []
    for lab, a in algebra_probes(bundle, samples, seed):
        Ja = rep.j_conjugate(a)
        R = rep.j_conjugate(velocity(bundle, H, a)) + 1j * (H @ Ja - Ja @ H)
        ab = hs_norm(bundle.compress(R))
        ref = 2 * Hn * hs_norm(Ja)
        out.append((lab, ab, _rel(ab, ref, ref)))
    return out


def check_reality(bundle: ModelBundle, H, tol: float = DEFAULT_TOL, samples: int = 2, seed: int = 0) -> CheckReport:
    res = reality_residuals(bundle, H, samples, seed)
    rep = bundle.rep
    jh = hs_norm(rep.j_conjugate(H) - H) / max(hs_norm(H), 1e-300)
    notes = [f"||J H J^-1 - H|| / ||H|| = {jh:.3e}"]
    return CheckReport("reality", bundle.label, [(f"reality:{lab}", rel) for lab, _, rel in res], tol,
                       bundle.window_params(), notes)
