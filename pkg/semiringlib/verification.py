"""Independent oracles: a brute-force semiring product, finite-difference gradient checks, initialization audits and property suites.

Reports render as human-readable text with :func:`str` and as JSON with ``to_json()``.

Examples
--------
.. code:: python

    >>> import numpy as np
    >>> from semiringlib.semiring import MAX_PLUS
    >>> from semiringlib.verification import reference_matvec, tie_distance

    >>> W = np.array([[0.0, -1.0]])
    >>> reference_matvec(MAX_PLUS, W, np.zeros(2))
    array([0.])
    >>> tie_distance(MAX_PLUS, W, np.zeros(2))
    1.0

Index
-----
.. currentmodule:: semiringlib.verification
.. autosummary::
    reference_matvec
    finite_diff_grad
    tie_distance
    init_audit
    uniform_sampler
    GradCheckEntry
    GradCheckReport
    check_gradients
    gradcheck_operator
    gradcheck_model
    run_gradcheck
    CheckResult
    check_semiring_axioms
    check_quasilinearity
    check_oracle
    run_propcheck

API
---
.. autofunction:: reference_matvec
.. autofunction:: finite_diff_grad
.. autofunction:: tie_distance
.. autofunction:: init_audit
.. autofunction:: uniform_sampler
.. autoclass:: GradCheckEntry
.. autoclass:: GradCheckReport
    :members: passed, to_json
.. autofunction:: check_gradients
.. autofunction:: gradcheck_operator
.. autofunction:: gradcheck_model
.. autofunction:: run_gradcheck
.. autoclass:: CheckResult
    :members: to_json
.. autofunction:: check_semiring_axioms
.. autofunction:: check_quasilinearity
.. autofunction:: check_oracle
.. autofunction:: run_propcheck

"""  # noqa: E501

import json
import math
import logging
import textwrap
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ShapeError
from .functional import cross_entropy_loss
from .init import InitSpec
from .layers import BlockVariant, ModelConfig, build_fc_model
from .linalg import semiring_forward, semiring_matmul, semiring_matvec
from .ndrepr import aNDRepr
from .semiring import (
    SemiringSpec, SemiringKind, MAX_PLUS, LINEAR, add, add_reduce, mul, one, zero
)
from .tensor import Tape, Tensor

__all__ = [
    'reference_matvec', 'finite_diff_grad', 'tie_distance', 'init_audit', 'uniform_sampler',
    'GradCheckEntry', 'GradCheckReport', 'check_gradients', 'gradcheck_operator',
    'gradcheck_model', 'run_gradcheck', 'CheckResult', 'check_semiring_axioms',
    'check_quasilinearity', 'check_oracle', 'run_propcheck'
]

logger = logging.getLogger(__name__)

#: Instances whose tie distance falls below this threshold are skipped by the gradient checks.
TIE_THRESHOLD = 1e-3

#: The semirings exercised by the command-line checks.
DEFAULT_SEMIRINGS: Tuple[SemiringSpec, ...] = (
    LINEAR, MAX_PLUS, SemiringSpec.min_plus(),
    SemiringSpec.log_plus(-10), SemiringSpec.log_plus(-1),
    SemiringSpec.log_plus(1), SemiringSpec.log_plus(10),
)


def _describe(key: str, value: Any, maxstring: int = 80) -> str:
    """Return a ``key: type = value`` line, moving long values to an indented new line."""
    value_str = aNDRepr.repr(value)
    key_str = f'{key}: {value.__class__.__name__} ='
    if '\n' in value_str or len(key_str) + len(value_str) > maxstring:
        return f'{key_str}\n{textwrap.indent(value_str, 4 * " ")}'
    return f'{key_str} {value_str}'


def reference_matvec(spec: SemiringSpec, W: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Compute :math:`W \\odot x` with a naive double loop over the scalar :func:`add` and :func:`mul`."""  # noqa: E501
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n, m = W.shape
    ret = np.empty(n)
    for i in range(n):
        acc = mul(spec, W[i, 0], x[0])
        for j in range(1, m):
            acc = add(spec, acc, mul(spec, W[i, j], x[j]))
        ret[i] = acc
    return ret


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                     h: float = 1e-6) -> np.ndarray:
    """Return the central-difference gradient :math:`(f(x + h e_i) - f(x - h e_i)) / 2h` of **f** at **x**.

    **x** is restored to its original values after every evaluation.

    """  # noqa: E501
    if not h > 0:
        raise ValueError(f"'h' expected a positive value; observed {h!r}")
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(x)
        flat[i] = orig - h
        f_minus = f(x)
        flat[i] = orig
        out[i] = (f_plus - f_minus) / (2 * h)
    return grad


def tie_distance(spec: SemiringSpec, W: np.ndarray, x: np.ndarray) -> float:
    """Return the smallest gap between the best and second-best candidate :math:`w_{ij} + x_j` over all rows.

    **x** may be a single vector or a batch. Returns ``inf`` for non-tropical semirings
    and for matrices with a single column.

    """  # noqa: E501
    W = np.asarray(W)
    if not spec.is_tropical or W.shape[1] < 2:
        return math.inf
    X = np.atleast_2d(x)
    candidates = np.sort(np.asarray(mul(spec, X[:, None, :], W[None, :, :])), axis=-1)
    if spec.kind is SemiringKind.MAX_PLUS:
        gap = candidates[..., -1] - candidates[..., -2]
    else:
        gap = candidates[..., 1] - candidates[..., 0]
    with np.errstate(invalid='ignore'):
        gap = np.nan_to_num(gap, nan=0.0, posinf=math.inf)
    return float(gap.min())


def uniform_sampler(m: int, half_width: float) -> Callable[[np.random.Generator], np.ndarray]:
    """Return a sampler of input vectors uniform on :math:`[-h, h]^m`."""
    def sampler(rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-half_width, half_width, size=m)
    return sampler


def init_audit(W: np.ndarray, m: int, n: int,
               input_sampler: Callable[[np.random.Generator], np.ndarray],
               trials: int, spec: SemiringSpec = MAX_PLUS,
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Count how many outputs every input column wins, per trial.

    Parameters
    ----------
    W : :class:`numpy.ndarray`, shape :math:`(n, m)`
        The weight matrix.

    m, n : :class:`int`
        The number of inputs and outputs; must match the shape of **W**.

    input_sampler : :data:`~typing.Callable`
        Maps a random number generator to an input vector of length *m*.

    trials : :class:`int`
        The number of sampled inputs.

    spec : :class:`~semiringlib.semiring.SemiringSpec`
        The tropical semiring deciding the winners; ties go to the lowest index.

    Returns
    -------
    :class:`numpy.ndarray`, shape :math:`(trials, m)`
        The win counts.

    Raises
    ------
    ShapeError
        Raised if **W** is not of shape ``(n, m)``.

    """
    W = np.asarray(W)
    if W.shape != (n, m):
        raise ShapeError(f"'W' expected shape {(n, m)!r} for m={m!r} and n={n!r}; "
                         f"observed {W.shape!r}")
    rng = rng if rng is not None else np.random.default_rng()
    X = np.stack([input_sampler(rng) for _ in range(trials)])
    _, saved = semiring_forward(spec, X, W)
    return np.stack([np.bincount(row, minlength=m) for row in saved['winners']])


@dataclass
class GradCheckEntry:
    """The comparison of one analytic gradient against finite differences."""

    name: str
    max_rel_err: float
    max_abs_err: float
    worst_index: Tuple[int, ...]
    passed: bool


@dataclass
class GradCheckReport:
    """The outcome of a finite-difference gradient check.

    An entry passes if, for every component, the relative error
    :math:`|a - f| / \\max(|a|, |f|, 10^{-8})` is at most :attr:`rtol` or the absolute
    error is at most :attr:`atol`.
    Instances within :data:`TIE_THRESHOLD` of a non-differentiable point are skipped.

    """

    name: str
    entries: List[GradCheckEntry] = field(default_factory=list)
    tie_distance: float = math.inf
    skipped: bool = False
    rtol: float = 1e-4
    atol: float = 1e-8

    @property
    def passed(self) -> bool:
        """Whether all entries passed; skipped reports count as passed."""
        return self.skipped or all(e.passed for e in self.entries)

    @property
    def worst(self) -> Optional[GradCheckEntry]:
        """The entry with the largest relative error."""
        return max(self.entries, key=lambda e: e.max_rel_err, default=None)

    def to_json(self) -> str:
        """Return this report as JSON."""
        dct = dataclasses.asdict(self)
        dct['passed'] = self.passed
        return json.dumps(dct, default=float)

    def __str__(self) -> str:
        status = 'SKIPPED' if self.skipped else ('PASSED' if self.passed else 'FAILED')
        lines = [f'gradcheck {self.name}: {status}',
                 _describe('tie_distance', self.tie_distance),
                 _describe('rtol', self.rtol)]
        worst = self.worst
        if worst is not None:
            lines.append(_describe('worst', worst.name))
            lines.append(_describe('max_rel_err', worst.max_rel_err))
            lines.append(_describe('worst_index', worst.worst_index))
        lines += [f'    {e.name}: {"ok" if e.passed else "FAIL"} '
                  f'(rel={aNDRepr.repr(e.max_rel_err)}, abs={aNDRepr.repr(e.max_abs_err)})'
                  for e in self.entries]
        return '\n'.join(lines)


def _compare(name: str, analytic: np.ndarray, numeric: np.ndarray, rtol: float,
             atol: float) -> GradCheckEntry:
    abs_err = np.abs(analytic - numeric)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    ok = (rel_err <= rtol) | (abs_err <= atol)
    score = rel_err if ok.all() else np.where(ok, -1.0, rel_err)
    worst = np.unravel_index(int(np.argmax(score)), rel_err.shape) if rel_err.size else ()
    return GradCheckEntry(name, float(rel_err.max(initial=0)), float(abs_err.max(initial=0)),
                          tuple(int(i) for i in worst), bool(ok.all()))


def _kink_distance(tape: Tape) -> float:
    """Return the distance of the recorded computation to its nearest non-differentiable point."""
    ret = math.inf
    for node in tape.nodes:
        if node.op == 'relu':
            ret = min(ret, float(np.abs(node.inputs[0].data).min(initial=math.inf)))
        elif node.op in ('semiring_matmul', 'semiring_matvec') and node.saved:
            spec = node.saved['spec']
            x, W = node.inputs
            ret = min(ret, tie_distance(spec, W.data, x.data))
    return ret


def check_gradients(name: str, func: Callable[[Optional[Tape]], Tensor],
                    tensors: Sequence[Tensor], rtol: float = 1e-4, atol: float = 1e-8,
                    h: float = 1e-6) -> GradCheckReport:
    """Compare the tape gradients of the scalar **func** with central finite differences.

    Parameters
    ----------
    name : :class:`str`
        The name of the check.

    func : :data:`~typing.Callable`
        Evaluates the scalar objective; records on the tape it is passed, if any.

    tensors : :class:`~collections.abc.Sequence` [:class:`~semiringlib.tensor.Tensor`]
        The tensors to differentiate with respect to; must require gradients.

    """
    for t in tensors:
        t.zero_grad()
    tape = Tape()
    out = func(tape)
    report = GradCheckReport(name, tie_distance=_kink_distance(tape), rtol=rtol, atol=atol)
    if report.tie_distance < TIE_THRESHOLD:
        logger.warning("Skipping gradient check %r: tie distance %g", name, report.tie_distance)
        report.skipped = True
        return report
    tape.backward(out)

    for i, t in enumerate(tensors):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = finite_diff_grad(lambda _: func(None).item(), t.data, h)
        report.entries.append(_compare(t.name or f'input{i}', analytic, numeric, rtol, atol))
    return report


def gradcheck_operator(spec: SemiringSpec, n: int = 4, m: int = 3, batch: int = 2,
                       rng: Optional[np.random.Generator] = None, **kwargs: Any) -> GradCheckReport:
    """Check the gradients of :math:`\\sum_{bi} g_{bi} (W \\odot x_b)_i` with respect to *W* and *X*."""  # noqa: E501
    rng = rng if rng is not None else np.random.default_rng()
    W = Tensor(rng.uniform(-1, 1, size=(n, m)), requires_grad=True, name='W')
    X = Tensor(rng.uniform(-1, 1, size=(batch, m)), requires_grad=True, name='X')
    G = rng.integers(-3, 4, size=(batch, n)).astype(np.float64)

    def func(tape: Optional[Tape]) -> Tensor:
        Y = semiring_matmul(spec, X, W, tape=tape)
        out = Tensor(np.asarray((Y.data * G).sum()))
        if tape is None:
            return out
        return tape.record('weighted_sum', (Y,), out, lambda g: (g * G,))

    return check_gradients(f'operator[{spec.label}, {n}x{m}]', func, [W, X], **kwargs)


def gradcheck_model(semiring: Optional[SemiringSpec], n_features: int = 4, n_classes: int = 3,
                    width: int = 4, batch: int = 8, rng: Optional[np.random.Generator] = None,
                    **kwargs: Any) -> GradCheckReport:
    """Check every parameter and input gradient of an iris-scale model in double precision.

    **semiring** ``None`` selects the ReLU baseline; otherwise the bottleneck block is used.

    """
    rng = rng if rng is not None else np.random.default_rng()
    variant = BlockVariant.RELU_PLAIN if semiring is None else BlockVariant.SEMIRING_V1
    config = ModelConfig(n_features, n_classes, width, variant, semiring)
    model = build_fc_model(config, rng, InitSpec(), np.float64, zero_head=False)
    X = Tensor(rng.normal(size=(batch, n_features)), requires_grad=True, name='input')
    labels = rng.integers(0, n_classes, size=batch)

    def func(tape: Optional[Tape]) -> Tensor:
        return cross_entropy_loss(model(X, tape), labels, tape=tape)

    label = 'relu' if semiring is None else semiring.label
    return check_gradients(f'model[{label}]', func, [*model.parameters(), X], **kwargs)


def run_gradcheck(semirings: Iterable[SemiringSpec] = DEFAULT_SEMIRINGS,
                  sizes: Sequence[Tuple[int, int]] = ((4, 3), (8, 8)), seed: int = 0,
                  include_baseline: bool = True, attempts: int = 5) -> List[GradCheckReport]:
    """Run the operator checks for all **sizes** and the model check for every semiring.

    Instances too close to a tie are redrawn up to **attempts** times before being reported
    as skipped.

    """
    rng = np.random.default_rng(seed)
    jobs: List[Callable[[], GradCheckReport]] = []
    if include_baseline:
        jobs.append(lambda: gradcheck_model(None, rng=rng))
    for spec in semirings:
        for n, m in sizes:
            jobs.append(lambda spec=spec, n=n, m=m: gradcheck_operator(spec, n, m, rng=rng))
        jobs.append(lambda spec=spec: gradcheck_model(spec, rng=rng))

    ret = []
    for job in jobs:
        for _ in range(attempts):
            report = job()
            if not report.skipped:
                break
        ret.append(report)
    return ret


@dataclass
class CheckResult:
    """The outcome of a property check over many random instances."""

    name: str
    semiring: str
    n_cases: int
    max_residual: float
    tolerance: float
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Whether the largest residual is within the tolerance."""
        return self.max_residual <= self.tolerance

    def to_json(self) -> str:
        """Return this result as JSON."""
        dct = dataclasses.asdict(self)
        dct['passed'] = self.passed
        return json.dumps(dct, default=float)

    def __str__(self) -> str:
        status = 'PASSED' if self.passed else 'FAILED'
        return (f'{self.name} [{self.semiring}]: {status} '
                f'(max residual {aNDRepr.repr(self.max_residual)} <= '
                f'{aNDRepr.repr(self.tolerance)} over {self.n_cases} cases)')


def _residual(lhs: np.ndarray, rhs: np.ndarray) -> float:
    """Return the largest relative residual with a floor of 1; equal infinities count as 0."""
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    same = lhs == rhs
    with np.errstate(invalid='ignore'):
        err = np.abs(lhs - rhs) / np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1)
    err = np.where(same, 0.0, err)
    err = np.where(np.isnan(err), math.inf, err)
    return float(err.max(initial=0))


def _sample(spec: SemiringSpec, rng: np.random.Generator, size: Any,
            low: float = -50, high: float = 50) -> np.ndarray:
    """Draw random values; tropical values are multiples of 1/4 so sums are exact."""
    if spec.is_tropical:
        return rng.integers(int(4 * low), int(4 * high) + 1, size=size) / 4
    return rng.uniform(low, high, size=size)


def _tolerance(spec: SemiringSpec, default: float) -> float:
    return 0.0 if spec.is_tropical else default


def check_semiring_axioms(spec: SemiringSpec, n: int = 1000, seed: int = 0,
                          tol: float = 1e-12) -> List[CheckResult]:
    """Check the semiring axioms of **spec** on **n** random triples from :math:`[-50, 50]`.

    Covers associativity and commutativity of both operations, distributivity, both
    identities, annihilation, idempotence (tropical) or its failure :math:`a \\oplus a = a + \\log(2)/\\mu`
    (logarithmic), the tropical limit of the logarithmic sum and the permutation
    invariance of :func:`~semiringlib.semiring.add_reduce`.

    """  # noqa: E501
    rng = np.random.default_rng(seed)
    a, b, c = _sample(spec, rng, (3, n))
    t = _tolerance(spec, tol)
    label = spec.label
    z = zero(spec)
    o = one(spec)

    checks: List[Tuple[str, Any, Any, float]] = [
        ('add associativity', add(spec, add(spec, a, b), c), add(spec, a, add(spec, b, c)), t),
        ('mul associativity', mul(spec, mul(spec, a, b), c), mul(spec, a, mul(spec, b, c)), t),
        ('add commutativity', add(spec, a, b), add(spec, b, a), t),
        ('mul commutativity', mul(spec, a, b), mul(spec, b, a), t),
        ('distributivity', mul(spec, a, add(spec, b, c)),
         add(spec, mul(spec, a, b), mul(spec, a, c)), t),
        ('additive identity', add(spec, z, a), a, t),
        ('multiplicative identity', mul(spec, o, a), a, t),
        ('annihilation', mul(spec, z, a), np.full(n, z), 0.0),
    ]
    if spec.is_tropical:
        checks.append(('idempotence', add(spec, a, a), a, 0.0))
    elif spec.is_logarithmic:
        mu: float = spec.mu  # type: ignore[assignment]
        checks.append(('non-idempotence', add(spec, a, a), a + math.log(2) / mu, tol))

    values = _sample(spec, rng, (n // 10 or 1, 8))
    perm = rng.permuted(values, axis=1)
    checks.append(('reduce permutation', add_reduce(spec, values), add_reduce(spec, perm), t))

    ret = [CheckResult(name, label, n, _residual(lhs, rhs), tolerance)
           for name, lhs, rhs, tolerance in checks]

    # Absolute: |(a ⊕ b) - max(a, b)| <= log(2) / |μ|
    if spec.is_logarithmic:
        limit = np.maximum(a, b) if mu > 0 else np.minimum(a, b)
        gap = float(np.abs(np.asarray(add(spec, a, b)) - limit).max())
        ret.append(CheckResult('tropical limit', label, n, gap, math.log(2) / abs(mu)))
    return ret


def check_quasilinearity(spec: SemiringSpec, n: int = 200, seed: int = 0,
                         tol: float = 1e-10) -> CheckResult:
    """Check :math:`B \\odot (a \\odot x \\oplus b \\odot y) = a \\odot (B \\odot x) \\oplus b \\odot (B \\odot y)` on **n** random instances."""  # noqa: E501
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        rows, cols = rng.integers(1, 9, size=2)
        low, high = (-50, 50) if spec.is_tropical else (-5, 5)
        B = _sample(spec, rng, (rows, cols), low, high)
        x, y = _sample(spec, rng, (2, cols), low, high)
        a, b = _sample(spec, rng, 2, low, high)
        lhs = semiring_matvec(spec, B, add(spec, mul(spec, a, x), mul(spec, b, y))).data
        rhs = add(spec, mul(spec, a, semiring_matvec(spec, B, x).data),
                  mul(spec, b, semiring_matvec(spec, B, y).data))
        worst = max(worst, _residual(lhs, rhs))
    return CheckResult('quasilinearity', spec.label, n, worst, _tolerance(spec, tol))


def check_oracle(spec: SemiringSpec, n: int = 100, seed: int = 0,
                 tol: float = 1e-12) -> CheckResult:
    """Compare :func:`~semiringlib.linalg.semiring_matmul` with :func:`reference_matvec` on **n** random instances with at most 8 rows and columns."""  # noqa: E501
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        rows, cols, batch = rng.integers(1, 9, size=3)
        W = rng.uniform(-5, 5, size=(rows, cols))
        X = rng.uniform(-5, 5, size=(batch, cols))
        Y = semiring_matmul(spec, X, W).data
        ref = np.stack([reference_matvec(spec, W, x) for x in X])
        worst = max(worst, _residual(Y, ref))
    return CheckResult('oracle', spec.label, n, worst, _tolerance(spec, tol))


def run_propcheck(semirings: Iterable[SemiringSpec] = DEFAULT_SEMIRINGS,
                  seed: int = 0) -> List[CheckResult]:
    """Run the axiom, quasilinearity and oracle suites for every semiring."""
    ret: List[CheckResult] = []
    for spec in semirings:
        ret += check_semiring_axioms(spec, seed=seed)
        ret.append(check_quasilinearity(spec, seed=seed))
        ret.append(check_oracle(spec, seed=seed))
    return ret
