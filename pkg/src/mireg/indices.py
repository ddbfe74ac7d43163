"""Multi-index combinatorics and exact homogeneity arithmetic.

A multi-index ``beta = (beta_x, beta')`` pairs polynomial decoration
exponents (one natural per spatial axis) with a finitely supported map
counting coefficient derivatives.  Homogeneities ``m + n*alpha`` are kept
as exact integer pairs so that grading comparisons never touch floats.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple


@dataclass(frozen=True, order=False)
class MultiIndex:
    """Immutable index (beta_x, beta'): beta_prime stores (k, count) pairs,
    sorted by k, with all counts positive."""

    beta_x: Tuple[int, ...]
    beta_prime: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        if any(b < 0 for b in self.beta_x):
            raise ValueError("beta_x entries must be naturals")
        ks = [k for k, _ in self.beta_prime]
        if ks != sorted(set(ks)):
            raise ValueError("beta_prime keys must be sorted and unique")
        if any(k < 1 or c < 1 for k, c in self.beta_prime):
            raise ValueError("beta_prime must have positive keys and counts")

    @staticmethod
    def make(beta_x: Sequence[int], beta_prime: Dict[int, int]) -> "MultiIndex":
        items = tuple(sorted((k, c) for k, c in beta_prime.items() if c != 0))
        return MultiIndex(tuple(beta_x), items)

    @staticmethod
    def zero(d: int) -> "MultiIndex":
        return MultiIndex((0,) * d, ())

    @staticmethod
    def unit_x(d: int, axis: int) -> "MultiIndex":
        bx = [0] * d
        bx[axis] = 1
        return MultiIndex(tuple(bx), ())

    @staticmethod
    def unit_prime(d: int, k: int) -> "MultiIndex":
        return MultiIndex((0,) * d, ((k, 1),))

    @property
    def d(self) -> int:
        return len(self.beta_x)

    def prime_dict(self) -> Dict[int, int]:
        return dict(self.beta_prime)

    def prime(self, k: int) -> int:
        for kk, c in self.beta_prime:
            if kk == k:
                return c
        return 0

    @property
    def poly_order(self) -> int:
        """|beta_x|: total polynomial decoration."""
        return sum(self.beta_x)

    @property
    def scaled_norm(self) -> int:
        """|beta'|_s = sum_k k * beta'(k)."""
        return sum(k * c for k, c in self.beta_prime)

    @property
    def angle(self) -> int:
        """<beta> = 1 + |beta'|_s - |beta_x| (may be negative)."""
        return 1 + self.scaled_norm - self.poly_order

    @property
    def is_purely_polynomial(self) -> bool:
        return not self.beta_prime

    @property
    def is_zero(self) -> bool:
        return self.poly_order == 0 and not self.beta_prime

    @property
    def is_affine(self) -> bool:
        return self.poly_order == 1 and not self.beta_prime

    @property
    def is_dormant(self) -> bool:
        """Purely polynomial of degree >= 2: kept in the algebra but its
        model component vanishes identically."""
        return self.is_purely_polynomial and self.poly_order >= 2

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        bx = tuple(a + b for a, b in zip(self.beta_x, other.beta_x))
        bp = self.prime_dict()
        for k, c in other.beta_prime:
            bp[k] = bp.get(k, 0) + c
        return MultiIndex.make(bx, bp)

    def shift_prime(self, k: int, delta: int) -> "MultiIndex":
        """Return beta with beta'(k) changed by delta (may raise if negative)."""
        bp = self.prime_dict()
        bp[k] = bp.get(k, 0) + delta
        if bp[k] < 0:
            raise ValueError("negative beta_prime entry")
        return MultiIndex.make(self.beta_x, bp)

    def shift_x(self, axis: int, delta: int) -> "MultiIndex":
        bx = list(self.beta_x)
        bx[axis] += delta
        if bx[axis] < 0:
            raise ValueError("negative beta_x entry")
        return MultiIndex.make(bx, self.prime_dict())

    def sort_key(self) -> tuple:
        """Lexicographic tiebreak inside one homogeneity level."""
        return (self.poly_order, self.beta_x, self.beta_prime)

    def __repr__(self):
        bp = ",".join(f"{k}:{c}" for k, c in self.beta_prime)
        return f"MI({list(self.beta_x)}|{{{bp}}})"


@dataclass(frozen=True)
class Homogeneity:
    """Exact homogeneity m + n*alpha stored as the integer pair (m, n)."""

    int_part: int
    alpha_part: int

    def value(self, alpha: Fraction) -> Fraction:
        return self.int_part + self.alpha_part * Fraction(alpha)

    def __add__(self, other: "Homogeneity") -> "Homogeneity":
        return Homogeneity(self.int_part + other.int_part,
                           self.alpha_part + other.alpha_part)

    def __sub__(self, other: "Homogeneity") -> "Homogeneity":
        return Homogeneity(self.int_part - other.int_part,
                           self.alpha_part - other.alpha_part)

    def __repr__(self):
        return f"H({self.int_part}+{self.alpha_part}a)"


def scaled_norm(beta_prime: Dict[int, int]) -> int:
    """|beta'|_s = sum_k k*beta'(k) for a finitely supported map."""
    return sum(k * c for k, c in beta_prime.items())


def angle(beta: MultiIndex) -> int:
    return beta.angle


def homogeneity(beta: MultiIndex, alpha: Fraction = None) -> Homogeneity:
    """|beta| = <beta>*alpha + |beta_x| as the exact pair; alpha is only
    needed by callers that want a numeric value."""
    return Homogeneity(beta.poly_order, beta.angle)


def additivity_check(beta1: MultiIndex, beta2: MultiIndex) -> Tuple[Homogeneity, int]:
    """Return (|beta1|+|beta2|, <beta1>+<beta2>) and assert the exact
    identities |beta1|+|beta2| = |beta1+beta2|+alpha and
    <beta1>+<beta2> = <beta1+beta2>+1."""
    s = beta1 + beta2
    h_sum = homogeneity(beta1) + homogeneity(beta2)
    a_sum = beta1.angle + beta2.angle
    expected_h = homogeneity(s) + Homogeneity(0, 1)
    assert h_sum == expected_h, (beta1, beta2)
    assert a_sum == s.angle + 1, (beta1, beta2)
    return h_sum, a_sum


def critical_integers(alpha: Fraction):
    """Return (n, n', alpha') with n*alpha < 2 < (n+1)*alpha and
    n'*alpha < 1 < (n'+1)*alpha; rejects resonant alpha."""
    alpha = Fraction(alpha)
    if not (0 < alpha < 1):
        raise ValueError(f"alpha={alpha} outside (0,1)")
    for target in (2, 1):
        if (Fraction(target) / alpha).denominator == 1:
            raise ValueError(f"alpha={alpha} resonant: {target}/alpha is an integer")
    n = int(Fraction(2) / alpha)
    n_prime = int(Fraction(1) / alpha)
    return n, n_prime, Homogeneity(0, n_prime + 1)


class IndexSet:
    """Populated multi-indices below a homogeneity cutoff, in canonical
    graded-lexicographic order, with dormant polynomial indices flagged."""

    def __init__(self, alpha: Fraction, d: int, cutoff: Homogeneity,
                 entries: List[Tuple[MultiIndex, Homogeneity, bool]]):
        self.alpha = Fraction(alpha)
        self.d = d
        self.cutoff = cutoff
        self.entries = entries
        self._pos = {b: i for i, (b, _, _) in enumerate(entries)}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, beta: MultiIndex) -> bool:
        return beta in self._pos

    def indices(self) -> List[MultiIndex]:
        return [b for b, _, _ in self.entries]

    def active(self) -> List[MultiIndex]:
        return [b for b, _, dormant in self.entries if not dormant]

    def is_dormant(self, beta: MultiIndex) -> bool:
        return self.entries[self._pos[beta]][2]

    def hvalue(self, beta: MultiIndex) -> Fraction:
        return homogeneity(beta).value(self.alpha)

    def below(self, bound: Fraction) -> List[MultiIndex]:
        return [b for b, h, _ in self.entries if h.value(self.alpha) < bound]

    def levels(self) -> List[Fraction]:
        seen = []
        for b, h, _ in self.entries:
            v = h.value(self.alpha)
            if v not in seen:
                seen.append(v)
        return seen

    # text format: one entry per line, "m n | beta_x | k:count,..."
    def to_text(self) -> str:
        lines = [f"# alpha {self.alpha.numerator}/{self.alpha.denominator} "
                 f"d {self.d} cutoff {self.cutoff.int_part} {self.cutoff.alpha_part}"]
        for beta, h, dormant in self.entries:
            bx = " ".join(str(b) for b in beta.beta_x)
            bp = ",".join(f"{k}:{c}" for k, c in beta.beta_prime)
            flag = " dormant" if dormant else ""
            lines.append(f"{h.int_part} {h.alpha_part} | {bx} | {bp}{flag}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "IndexSet":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        head = lines[0].split()
        alpha = Fraction(head[2])
        d = int(head[4])
        cutoff = Homogeneity(int(head[6]), int(head[7]))
        entries = []
        for ln in lines[1:]:
            dormant = ln.rstrip().endswith("dormant")
            if dormant:
                ln = ln.rstrip()[: -len("dormant")]
            hpart, bxpart, bppart = [p.strip() for p in ln.split("|")]
            m, n = (int(v) for v in hpart.split())
            bx = tuple(int(v) for v in bxpart.split()) if bxpart else (0,) * d
            bp = {}
            if bppart:
                for item in bppart.split(","):
                    k, c = item.split(":")
                    bp[int(k)] = int(c)
            beta = MultiIndex.make(bx, bp)
            entries.append((beta, Homogeneity(m, n), dormant))
        return IndexSet(alpha, d, cutoff, entries)


def _check_no_grading_collision(alpha: Fraction,
                                betas: Iterable[MultiIndex]):
    """Distinct (m, n) grading pairs occurring among `betas` must give
    distinct homogeneity values; this substitutes for irrationality of
    alpha.  Dormant indices are exempt: their components vanish, so ties
    involving them cannot break the triangular order."""
    seen = {}
    for beta in betas:
        if beta.is_dormant:
            continue
        pair = (beta.poly_order, beta.angle)
        v = pair[0] + pair[1] * alpha
        if v in seen and seen[v] != pair:
            raise ValueError(
                f"homogeneity collision at {v}: {seen[v]} vs {pair}; "
                f"choose a different rational alpha")
        seen[v] = pair


def _d0_reachable(beta: MultiIndex, steps: int) -> set:
    """Index support reachable by `steps` applications of the advection
    derivation: either append a first-order slot or promote one slot."""
    frontier = {beta}
    for _ in range(steps):
        nxt = set()
        for b in frontier:
            nxt.add(b.shift_prime(1, 1))
            for k, c in b.beta_prime:
                nxt.add(b.shift_prime(k, -1).shift_prime(k + 1, 1))
        frontier = nxt
    return frontier


def enumerate_populated(alpha: Fraction, d: int, cutoff: Homogeneity,
                        max_size: int = 5000) -> IndexSet:
    """Least fixed point of the population rules below the cutoff, plus
    dormant purely polynomial indices, in canonical order."""
    alpha = Fraction(alpha)
    cutoff_val = cutoff.value(alpha)
    if cutoff_val > 2 + alpha:
        raise ValueError("cutoff must be <= 2 + alpha")
    n, _, _ = critical_integers(alpha)

    def hv(b: MultiIndex) -> Fraction:
        return homogeneity(b).value(alpha)

    populated = {MultiIndex.zero(d)}
    populated.update(MultiIndex.unit_x(d, i) for i in range(d))
    populated = {b for b in populated if hv(b) < cutoff_val}

    changed = True
    while changed:
        changed = False
        current = sorted(populated, key=hv)
        homs = [hv(b) for b in current]
        # z_k-rule: beta = e'_k + beta_1 + ... + beta_{k+1}; by additivity
        # the composite homogeneity is the plain sum over the children
        k = 1
        while alpha * (k + 1) < cutoff_val:
            for combo in itertools.combinations_with_replacement(
                    range(len(current)), k + 1):
                total_h = sum(homs[i] for i in combo)
                if total_h >= cutoff_val:
                    continue
                beta = MultiIndex.unit_prime(d, k)
                for i in combo:
                    beta = beta + current[i]
                if beta not in populated:
                    populated.add(beta)
                    changed = True
            k += 1
        # q-rule: beta = beta_1 + ... + beta_k + gamma with gamma in the
        # k-step derivation image of a counter-term index
        qkeys = [b for b in current
                 if b.poly_order == 0 and b.scaled_norm <= n - 1]
        k = 1
        while True:
            base_min = min((hv(b) for b in qkeys), default=None)
            if base_min is None or base_min + alpha * k >= cutoff_val:
                break
            for qk in qkeys:
                for gamma in _d0_reachable(qk, k):
                    hg = hv(gamma)
                    if hg >= cutoff_val:
                        continue
                    for combo in itertools.combinations_with_replacement(
                            range(len(current)), k):
                        # k products cancel the k derivation raises
                        total_h = hg + sum(homs[i] for i in combo) - k * alpha
                        if total_h >= cutoff_val:
                            continue
                        beta = gamma
                        for i in combo:
                            beta = beta + current[i]
                        if beta not in populated:
                            populated.add(beta)
                            changed = True
            k += 1
        if len(populated) > max_size:
            raise RuntimeError(f"index set exceeded size bound {max_size}")

    # dormant purely polynomial indices: |beta_x| >= 2 with homogeneity
    # m + (1 - m) * alpha still below the cutoff
    dormant = set()
    total = 2
    while total + (1 - total) * alpha < cutoff_val:
        for bx in _compositions(total, d):
            dormant.add(MultiIndex(tuple(bx), ()))
        total += 1

    _check_no_grading_collision(alpha, populated)
    entries = []
    for beta in populated | dormant:
        entries.append((beta, homogeneity(beta), beta in dormant))
    entries.sort(key=lambda e: (e[1].value(alpha), e[0].sort_key()))
    return IndexSet(alpha, d, cutoff, entries)


def _compositions(total: int, d: int) -> Iterable[Tuple[int, ...]]:
    if d == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, d - 1):
            yield (first,) + rest
