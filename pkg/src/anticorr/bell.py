"""Joint-distribution feasibility for three binary variables.

Given marginals P(X_i = 1) and pairwise agreement probabilities
P(X_i = X_j), decide whether any single probability distribution over the
eight outcome triples reproduces them.  Feasible instances come back with an
explicit witness distribution; infeasible ones with a short certificate: a
linear functional that is nonnegative on every distribution yet forced
negative by the prescribed moments, checkable with a dozen multiplications.

The instance is an eight-variable linear feasibility problem (nonnegativity,
normalization, three marginal and three agreement equations) and is solved
exactly over the rationals, so verdicts carry no solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

#: outcome triples (x1, x2, x3); weight index is x1*4 + x2*2 + x3
ATOMS: tuple[tuple[int, int, int], ...] = tuple(
    (a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)
)
#: unordered variable pairs, in the order the agreement entries use
PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))


def _check_unit(name: str, values) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if len(vals) != 3:
        raise ValueError(f"{name} must have exactly three entries")
    for v in vals:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} entries must lie in [0, 1]")
    return vals


@dataclass(frozen=True)
class PairwiseSpec:
    """Marginals (chance of value 1) and agreements a_ij = P(X_i = X_j).

    Agreement order follows PAIRS: (X1,X2), (X1,X3), (X2,X3).
    """

    marginals: tuple[float, float, float]
    agreements: tuple[float, float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "marginals", _check_unit("marginals", self.marginals))
        object.__setattr__(self, "agreements", _check_unit("agreements", self.agreements))

    def to_dict(self) -> dict:
        return {"marginals": list(self.marginals), "agreements": list(self.agreements)}


@dataclass(frozen=True)
class JointDistribution:
    """Probability weights over the eight binary triples, ATOMS order."""

    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.weights) != 8:
            raise ValueError("a joint distribution over three bits needs 8 weights")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")

    def marginal(self, i: int) -> float:
        return sum(w for w, atom in zip(self.weights, ATOMS) if atom[i] == 1)

    def agreement(self, i: int, j: int) -> float:
        return sum(w for w, atom in zip(self.weights, ATOMS) if atom[i] == atom[j])

    def max_constraint_error(self, spec: PairwiseSpec) -> float:
        errs = [abs(self.marginal(i) - spec.marginals[i]) for i in range(3)]
        errs += [abs(self.agreement(i, j) - spec.agreements[k]) for k, (i, j) in enumerate(PAIRS)]
        errs.append(abs(sum(self.weights) - 1.0))
        return max(errs)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights)}


@dataclass(frozen=True)
class InfeasibilityCertificate:
    """Separating functional proving no joint distribution exists.

    ``atom_coefficients`` (all >= 0) define f(w) = sum(coef * w) >= 0 for every
    distribution w.  They arise as the combination ``constraint_coefficients``
    of the seven constraint rows, whose right-hand sides force
    f(w) = ``required_value`` < 0 for any w meeting the prescribed moments.
    """

    constraint_coefficients: tuple[Fraction, ...]
    atom_coefficients: tuple[Fraction, ...]
    required_value: Fraction

    def verify(self, spec: PairwiseSpec) -> bool:
        """Recheck the certificate by direct multiplication against the spec."""
        a_rows, b = constraint_system(spec)
        y = self.constraint_coefficients
        atom = tuple(-sum(y[i] * a_rows[i][j] for i in range(7)) for j in range(8))
        required = -sum(y[i] * b[i] for i in range(7))
        return (
            atom == tuple(self.atom_coefficients)
            and required == self.required_value
            and all(c >= 0 for c in atom)
            and required < 0
        )

    def to_dict(self) -> dict:
        return {
            "constraint_coefficients": [str(c) for c in self.constraint_coefficients],
            "atom_coefficients": [str(c) for c in self.atom_coefficients],
            "required_value": str(self.required_value),
            "required_value_float": float(self.required_value),
        }


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: JointDistribution | None = None
    certificate: InfeasibilityCertificate | None = None

    def to_dict(self) -> dict:
        out: dict = {"feasible": self.feasible}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        if self.certificate is not None:
            out["certificate"] = self.certificate.to_dict()
        return out


def constraint_system(spec: PairwiseSpec) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Equality system A w = b over the eight atom weights (exact rationals).

    Row 0 is normalization, rows 1-3 the marginals, rows 4-6 the agreements.
    Floats convert exactly, so no rounding enters the arithmetic.
    """
    rows: list[list[Fraction]] = [[Fraction(1)] * 8]
    for i in range(3):
        rows.append([Fraction(1 if atom[i] == 1 else 0) for atom in ATOMS])
    for i, j in PAIRS:
        rows.append([Fraction(1 if atom[i] == atom[j] else 0) for atom in ATOMS])
    b = [Fraction(1)]
    b += [Fraction(m) for m in spec.marginals]
    b += [Fraction(a) for a in spec.agreements]
    return rows, b


def _phase_one_simplex(
    a_rows: list[list[Fraction]], b: list[Fraction]
) -> tuple[bool, list[Fraction]]:
    """Exact phase-one simplex for {w >= 0, A w = b} with b >= 0.

    Returns (True, basic feasible solution) or (False, Farkas vector y) with
    y.A <= 0 componentwise and y.b > 0.  Bland's rule guarantees termination.
    """
    m = len(a_rows)
    n = len(a_rows[0])
    width = n + m + 1
    rows = [
        [Fraction(a_rows[i][j]) for j in range(n)]
        + [Fraction(1 if k == i else 0) for k in range(m)]
        + [Fraction(b[i])]
        for i in range(m)
    ]
    basis = list(range(n, n + m))
    cost = [Fraction(0)] * n + [Fraction(1)] * m
    # reduced costs r_j = c_j - y.A_j with y = c_B B^-1; artificial basis: y = 1
    reduced = [cost[j] - sum(rows[i][j] for i in range(m)) for j in range(width - 1)]

    while True:
        entering = next((j for j in range(width - 1) if reduced[j] < 0), None)
        if entering is None:
            break
        pivot_row = None
        best = None
        for i in range(m):
            coef = rows[i][entering]
            if coef > 0:
                ratio = rows[i][-1] / coef
                if best is None or ratio < best or (ratio == best and basis[i] < basis[pivot_row]):
                    best = ratio
                    pivot_row = i
        if pivot_row is None:
            raise RuntimeError("phase-one objective unbounded; system is inconsistent")
        pr = rows[pivot_row]
        pivot = pr[entering]
        rows[pivot_row] = [v / pivot for v in pr]
        pr = rows[pivot_row]
        for i in range(m):
            if i != pivot_row and rows[i][entering] != 0:
                factor = rows[i][entering]
                rows[i] = [v - factor * pv for v, pv in zip(rows[i], pr)]
        factor = reduced[entering]
        if factor != 0:
            reduced = [r - factor * pv for r, pv in zip(reduced, pr[:-1])]
        basis[pivot_row] = entering

    objective = sum(rows[i][-1] for i in range(m) if basis[i] >= n)
    if objective == 0:
        solution = [Fraction(0)] * n
        for i, var in enumerate(basis):
            if var < n:
                solution[var] = rows[i][-1]
        return True, solution
    # dual extraction: reduced cost of artificial i is 1 - y_i
    y = [Fraction(1) - reduced[n + i] for i in range(m)]
    return False, y


def check_feasibility(spec: PairwiseSpec) -> FeasibilityResult:
    """Decide whether any joint distribution matches the prescribed moments."""
    a_rows, b = constraint_system(spec)
    feasible, payload = _phase_one_simplex(a_rows, b)
    if feasible:
        for i in range(7):
            if sum(a_rows[i][j] * payload[j] for j in range(8)) != b[i]:
                raise RuntimeError("simplex returned an inexact witness")
        witness = JointDistribution(tuple(float(w) for w in payload))
        return FeasibilityResult(feasible=True, witness=witness)
    y = payload
    atom = tuple(-sum(y[i] * a_rows[i][j] for i in range(7)) for j in range(8))
    required = -sum(y[i] * b[i] for i in range(7))
    certificate = InfeasibilityCertificate(
        constraint_coefficients=tuple(y),
        atom_coefficients=atom,
        required_value=required,
    )
    if not certificate.verify(spec):
        raise RuntimeError("extracted certificate failed self-verification")
    return FeasibilityResult(feasible=False, certificate=certificate)


def conjunction_bound(p_a: float, p_b: float) -> float:
    """Tight lower bound max(0, p_a + p_b - 1) on P(A and B).

    Exact: for any (p_a, p_b) there are events on [0, 1] with exactly this
    overlap, so no larger bound holds in general.
    """
    for name, p in (("p_a", p_a), ("p_b", p_b)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    return max(0.0, p_a + p_b - 1.0)
