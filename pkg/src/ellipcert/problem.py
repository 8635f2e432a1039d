"""Problem instances: the coefficients, scalars and domain of the model BVP.

A problem is  -div(gamma*A*grad u) + <H, grad u> + (c+alpha)*u = f  on an
axis-aligned box with homogeneous Dirichlet data.  Admissibility (entrywise
bound on A, ellipticity lower bound, sign of c) is checked by sampling on a
validation grid: positivity of expressions over the whole box is not
decidable for the grammar, so the checks are randomized-but-seeded sweeps.

Problem files are keyed documents (INI syntax) with sections [domain],
[coefficients], [scalars], [source] and optionally [oracle]:

    [domain]
    dim = 2
    x1 = 0, 1          ; interval per axis
    x2 = 0, 1

    [coefficients]
    a11 = 1            ; defaults: identity A, zero H, zero c
    h1 = 0
    c = 0
    div_a1 = 0         ; optional analytic divergence of A (column-wise)

    [scalars]
    gamma = 1
    alpha = 0
    lambda = 1         ; ellipticity lower bound
    m = 1              ; entrywise bound on A
    p = 3              ; L^p class of the drift bound (metadata)

    [source]
    f = 2*pi**2*sin(pi*x1)*sin(pi*x2)

    [oracle]           ; optional exact solution, used for true errors
    u = sin(pi*x1)*sin(pi*x2)
"""

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError
from .expressions import Expr, constant_expr, format_expr, parse_expr

_SECTIONS = {"domain", "coefficients", "scalars", "source", "oracle"}

DEFAULT_VALIDATION_NODES = 10_000
DEFAULT_VALIDATION_DIRECTIONS = 32


@dataclass(frozen=True)
class ProblemSpec:
    """Validated instance of the boundary value problem."""

    dim: int
    domain: tuple[tuple[float, float], ...]
    matrix_a: tuple[tuple[Expr, ...], ...]
    drift_h: tuple[Expr, ...]
    zero_order_c: Expr
    gamma: float
    alpha: float
    lambda_ellipticity: float
    m_bound: float
    source_f: Expr
    integrability_p: float
    div_a: tuple[Expr, ...] | None = None
    oracle_u: Expr | None = None

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.domain]))

    @property
    def widths(self) -> np.ndarray:
        return np.array([b - a for a, b in self.domain])

    @property
    def enclosing_ball(self) -> tuple[tuple[float, ...], float]:
        """Smallest ball containing the closed box, centered at the box center."""
        center = tuple((a + b) / 2.0 for a, b in self.domain)
        radius = 0.5 * math.sqrt(sum((b - a) ** 2 for a, b in self.domain))
        return center, radius

    def with_source(self, source_f: Expr, oracle_u: Expr | None = None) -> "ProblemSpec":
        return ProblemSpec(
            dim=self.dim,
            domain=self.domain,
            matrix_a=self.matrix_a,
            drift_h=self.drift_h,
            zero_order_c=self.zero_order_c,
            gamma=self.gamma,
            alpha=self.alpha,
            lambda_ellipticity=self.lambda_ellipticity,
            m_bound=self.m_bound,
            source_f=source_f,
            integrability_p=self.integrability_p,
            div_a=self.div_a,
            oracle_u=oracle_u if oracle_u is not None else self.oracle_u,
        )

    def equivalent(self, other: "ProblemSpec") -> bool:
        """Field-by-field equality: scalars exact, expressions structural."""
        if (self.dim, self.domain) != (other.dim, other.domain):
            return False
        scalars = ("gamma", "alpha", "lambda_ellipticity", "m_bound", "integrability_p")
        if any(getattr(self, k) != getattr(other, k) for k in scalars):
            return False
        for i in range(self.dim):
            for j in range(self.dim):
                if not self.matrix_a[i][j].equivalent(other.matrix_a[i][j]):
                    return False
            if not self.drift_h[i].equivalent(other.drift_h[i]):
                return False
        if not self.zero_order_c.equivalent(other.zero_order_c):
            return False
        if not self.source_f.equivalent(other.source_f):
            return False
        if (self.div_a is None) != (other.div_a is None):
            return False
        if self.div_a is not None:
            if any(not a.equivalent(b) for a, b in zip(self.div_a, other.div_a)):
                return False
        if (self.oracle_u is None) != (other.oracle_u is None):
            return False
        if self.oracle_u is not None and not self.oracle_u.equivalent(other.oracle_u):
            return False
        return True


@dataclass
class ValidationReport:
    """Outcome of the sampled admissibility checks."""

    min_quadratic_form: float
    min_form_witness: tuple[float, ...]
    max_abs_entry: float
    max_entry_witness: tuple[float, ...]
    min_c: float
    min_c_witness: tuple[float, ...]
    samples: int
    directions: int
    ellipticity_passed: bool = field(init=False)
    bound_passed: bool = field(init=False)
    c_sign_passed: bool = field(init=False)
    lambda_required: float = 0.0
    m_required: float = 0.0

    def finalize(self, lam: float, m: float) -> "ValidationReport":
        self.lambda_required = lam
        self.m_required = m
        tol = 1e-12 * max(1.0, abs(lam))
        self.ellipticity_passed = self.min_quadratic_form >= lam - tol
        self.bound_passed = self.max_abs_entry <= m + 1e-12 * max(1.0, m)
        self.c_sign_passed = self.min_c >= -1e-14
        return self

    @property
    def passed(self) -> bool:
        return self.ellipticity_passed and self.bound_passed and self.c_sign_passed

    def to_dict(self) -> dict:
        return {
            "min_quadratic_form": self.min_quadratic_form,
            "min_form_witness": list(self.min_form_witness),
            "max_abs_entry": self.max_abs_entry,
            "max_entry_witness": list(self.max_entry_witness),
            "min_c": self.min_c,
            "min_c_witness": list(self.min_c_witness),
            "samples": self.samples,
            "directions": self.directions,
            "lambda_required": self.lambda_required,
            "m_required": self.m_required,
            "ellipticity_passed": self.ellipticity_passed,
            "bound_passed": self.bound_passed,
            "c_sign_passed": self.c_sign_passed,
            "passed": self.passed,
        }


def _validation_points(spec: ProblemSpec, samples: int) -> np.ndarray:
    """Tensor sweep over the box with roughly `samples` nodes."""
    per_axis = max(2, int(round(samples ** (1.0 / spec.dim))))
    axes = [np.linspace(a, b, per_axis) for a, b in spec.domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, spec.dim)


def _directions(dim: int, count: int) -> np.ndarray:
    """Unit directions: a dense angular sweep for d=2, seeded sphere points else."""
    if dim == 2:
        theta = np.linspace(0.0, np.pi, count, endpoint=False)
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    rng = np.random.Generator(np.random.Philox(12345))
    dirs = rng.normal(size=(count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    axes = np.eye(dim)
    return np.vstack([axes, dirs])


def _matrix_values(spec: ProblemSpec, points: np.ndarray) -> np.ndarray:
    d = spec.dim
    out = np.empty((points.shape[0], d, d))
    for i in range(d):
        for j in range(d):
            out[:, i, j] = spec.matrix_a[i][j].eval_checked(points)
    return out


def validate_ellipticity(
    spec: ProblemSpec,
    samples: int = DEFAULT_VALIDATION_NODES,
    directions: int = DEFAULT_VALIDATION_DIRECTIONS,
) -> ValidationReport:
    """Sampled lower-bound check of <A xi, xi> >= lambda and |a_ij| <= M.

    The reported minimum is the exact minimum over the sample set, so it
    never exceeds the true minimum there and is monotone in sample count.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    points = _validation_points(spec, samples)
    dirs = _directions(spec.dim, directions)
    a_vals = _matrix_values(spec, points)

    forms = np.einsum("ki,nij,kj->nk", dirs, a_vals, dirs)
    flat = int(np.argmin(forms))
    n_idx, k_idx = np.unravel_index(flat, forms.shape)
    min_form = float(forms[n_idx, k_idx])
    min_witness = tuple(float(v) for v in points[n_idx])

    abs_entries = np.abs(a_vals).max(axis=(1, 2))
    max_idx = int(np.argmax(abs_entries))
    max_abs = float(abs_entries[max_idx])
    max_witness = tuple(float(v) for v in points[max_idx])

    c_vals = spec.zero_order_c.eval_checked(points)
    c_idx = int(np.argmin(c_vals))
    report = ValidationReport(
        min_quadratic_form=min_form,
        min_form_witness=min_witness,
        max_abs_entry=max_abs,
        max_entry_witness=max_witness,
        min_c=float(c_vals[c_idx]),
        min_c_witness=tuple(float(v) for v in points[c_idx]),
        samples=points.shape[0],
        directions=dirs.shape[0],
    )
    return report.finalize(spec.lambda_ellipticity, spec.m_bound)


def validate_spec(spec: ProblemSpec, samples: int = DEFAULT_VALIDATION_NODES) -> ValidationReport:
    """Run every condition check; raises ValidationError on the first failure."""
    if spec.dim < 2:
        raise ValidationError("dimension", f"d must be >= 2, got {spec.dim}")
    if spec.gamma < 1.0:
        raise ValidationError("gamma", f"gamma must be >= 1, got {spec.gamma}")
    if spec.alpha < 0.0:
        raise ValidationError("alpha", f"alpha must be >= 0, got {spec.alpha}")
    if spec.lambda_ellipticity <= 0.0:
        raise ValidationError("lambda", f"lambda must be > 0, got {spec.lambda_ellipticity}")
    if spec.m_bound <= 0.0:
        raise ValidationError("m_bound", f"M must be > 0, got {spec.m_bound}")
    if spec.integrability_p <= spec.dim:
        raise ValidationError("integrability_p", f"p must exceed d={spec.dim}, got {spec.integrability_p}")
    if any(b <= a for a, b in spec.domain):
        raise ValidationError("domain", "every interval must have positive length")

    points = _validation_points(spec, samples)
    for name, expr in _all_named_exprs(spec):
        expr.eval_checked(points)  # raises EvaluationError with the witness

    report = validate_ellipticity(spec, samples)
    if not report.c_sign_passed:
        raise ValidationError("c >= 0 violated", f"c = {report.min_c}", witness=report.min_c_witness)
    if not report.ellipticity_passed:
        raise ValidationError(
            "ellipticity",
            f"min <A xi, xi> = {report.min_quadratic_form} < lambda = {spec.lambda_ellipticity}",
            witness=report.min_form_witness,
        )
    if not report.bound_passed:
        raise ValidationError(
            "entry bound",
            f"max |a_ij| = {report.max_abs_entry} > M = {spec.m_bound}",
            witness=report.max_entry_witness,
        )
    return report


def _all_named_exprs(spec: ProblemSpec):
    for i in range(spec.dim):
        for j in range(spec.dim):
            yield f"a{i + 1}{j + 1}", spec.matrix_a[i][j]
        yield f"h{i + 1}", spec.drift_h[i]
    yield "c", spec.zero_order_c
    yield "f", spec.source_f
    if spec.div_a is not None:
        for i in range(spec.dim):
            yield f"div_a{i + 1}", spec.div_a[i]
    if spec.oracle_u is not None:
        yield "u", spec.oracle_u


def parse_problem(text: str, validate: bool = True, samples: int = DEFAULT_VALIDATION_NODES) -> ProblemSpec:
    """Parse a problem document; optionally run the full validation sweep."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ParseError(f"problem document: {exc.message}", line) from None

    unknown = set(parser.sections()) - _SECTIONS
    if unknown:
        raise ParseError(f"unknown sections {sorted(unknown)}; expected subset of {sorted(_SECTIONS)}")
    if "domain" not in parser:
        raise ParseError("missing [domain] section")

    dom = parser["domain"]
    try:
        dim = int(dom.get("dim", ""))
    except ValueError:
        raise ParseError("[domain] needs an integer 'dim'") from None
    if dim < 2:
        raise ParseError(f"dim must be >= 2, got {dim}")

    domain = []
    for i in range(1, dim + 1):
        key = f"x{i}"
        if key not in dom:
            raise ParseError(f"[domain] missing interval '{key} = a, b'")
        parts = [p.strip() for p in dom[key].split(",")]
        if len(parts) != 2:
            raise ParseError(f"[domain] {key} must be 'a, b'")
        try:
            a, b = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"[domain] {key}: endpoints must be numbers") from None
        domain.append((a, b))

    coeffs = parser["coefficients"] if "coefficients" in parser else {}

    def expr_of(section, key, default: str) -> Expr:
        raw = section.get(key, default) if hasattr(section, "get") else default
        try:
            return parse_expr(raw, dim)
        except ParseError as exc:
            raise ParseError(f"entry '{key}': {exc}") from None

    matrix_a = tuple(
        tuple(expr_of(coeffs, f"a{i}{j}", "1" if i == j else "0") for j in range(1, dim + 1))
        for i in range(1, dim + 1)
    )
    drift_h = tuple(expr_of(coeffs, f"h{i}", "0") for i in range(1, dim + 1))
    zero_order_c = expr_of(coeffs, "c", "0")
    div_a = None
    if any(f"div_a{i}" in coeffs for i in range(1, dim + 1)):
        div_a = tuple(expr_of(coeffs, f"div_a{i}", "0") for i in range(1, dim + 1))

    scalars = parser["scalars"] if "scalars" in parser else {}

    def scalar_of(key, default: float) -> float:
        raw = scalars.get(key) if hasattr(scalars, "get") else None
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ParseError(f"[scalars] {key} must be a number, got {raw!r}") from None

    gamma = scalar_of("gamma", 1.0)
    alpha = scalar_of("alpha", 0.0)
    lam = scalar_of("lambda", 1.0)
    m_bound = scalar_of("m", 1.0)
    p = scalar_of("p", float(dim + 1))

    source = parser["source"] if "source" in parser else {}
    source_f = expr_of(source, "f", "0")

    oracle_u = None
    if "oracle" in parser and "u" in parser["oracle"]:
        oracle_u = expr_of(parser["oracle"], "u", "0")

    spec = ProblemSpec(
        dim=dim,
        domain=tuple(domain),
        matrix_a=matrix_a,
        drift_h=drift_h,
        zero_order_c=zero_order_c,
        gamma=gamma,
        alpha=alpha,
        lambda_ellipticity=lam,
        m_bound=m_bound,
        source_f=source_f,
        integrability_p=p,
        div_a=div_a,
        oracle_u=oracle_u,
    )
    if validate:
        validate_spec(spec, samples)
    return spec


def print_problem(spec: ProblemSpec) -> str:
    """Render a spec back to document form; parse_problem round-trips it."""
    lines = ["[domain]", f"dim = {spec.dim}"]
    for i, (a, b) in enumerate(spec.domain, start=1):
        lines.append(f"x{i} = {a!r}, {b!r}")
    lines.append("")
    lines.append("[coefficients]")
    for i in range(spec.dim):
        for j in range(spec.dim):
            lines.append(f"a{i + 1}{j + 1} = {format_expr(spec.matrix_a[i][j])}")
    for i in range(spec.dim):
        lines.append(f"h{i + 1} = {format_expr(spec.drift_h[i])}")
    lines.append(f"c = {format_expr(spec.zero_order_c)}")
    if spec.div_a is not None:
        for i in range(spec.dim):
            lines.append(f"div_a{i + 1} = {format_expr(spec.div_a[i])}")
    lines.append("")
    lines.append("[scalars]")
    lines.append(f"gamma = {spec.gamma!r}")
    lines.append(f"alpha = {spec.alpha!r}")
    lines.append(f"lambda = {spec.lambda_ellipticity!r}")
    lines.append(f"m = {spec.m_bound!r}")
    lines.append(f"p = {spec.integrability_p!r}")
    lines.append("")
    lines.append("[source]")
    lines.append(f"f = {format_expr(spec.source_f)}")
    if spec.oracle_u is not None:
        lines.append("")
        lines.append("[oracle]")
        lines.append(f"u = {format_expr(spec.oracle_u)}")
    return "\n".join(lines) + "\n"


def identity_matrix_exprs(dim: int) -> tuple[tuple[Expr, ...], ...]:
    return tuple(
        tuple(constant_expr(1.0 if i == j else 0.0, dim) for j in range(dim)) for i in range(dim)
    )
