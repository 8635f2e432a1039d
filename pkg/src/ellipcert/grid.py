"""Tensor-product grids on axis-aligned boxes, sampled fields, stencils, norms.

Quadrature is the trapezoidal product rule throughout, so node-sampled
fields feed the norm computations without resampling.  Summations are
numpy reductions over C-ordered arrays (lexicographic node order, pairwise
tree reduction), which keeps every result independent of evaluation order.
"""

import io
import json

import numpy as np

from .errors import EvaluationError
from .expressions import Expr


class Grid:
    """Structured grid with uniform spacing per axis (>= 3 nodes each)."""

    def __init__(self, axes: list[np.ndarray]):
        if len(axes) < 1:
            raise ValueError("grid needs at least one axis")
        self.axes = [np.asarray(ax, dtype=float) for ax in axes]
        for ax in self.axes:
            if ax.ndim != 1 or ax.size < 3:
                raise ValueError("each axis needs at least 3 nodes")
        self.dim = len(self.axes)
        self.shape = tuple(ax.size for ax in self.axes)
        self.box = tuple((float(ax[0]), float(ax[-1])) for ax in self.axes)
        self.spacing = np.array([(ax[-1] - ax[0]) / (ax.size - 1) for ax in self.axes])
        self.volume = float(np.prod([b - a for a, b in self.box]))

    @classmethod
    def from_box(cls, box, shape) -> "Grid":
        """Grid on [a1,b1]x...x[ad,bd] with shape[i] nodes along axis i."""
        if np.isscalar(shape):
            shape = (int(shape),) * len(box)
        axes = [np.linspace(a, b, n) for (a, b), n in zip(box, shape)]
        return cls(axes)

    def enlarged(self, factor: float) -> tuple["Grid", tuple[slice, ...]]:
        """Enlarge the box about its center by `factor`, keeping the spacing.

        The margin is rounded up to whole cells so the original nodes are a
        bitwise subset of the enlarged ones.  Returns the enlarged grid and
        the slices that restrict back to this grid.
        """
        if factor < 1.0:
            raise ValueError("enlargement factor must be >= 1")
        axes = []
        slices = []
        for ax, h in zip(self.axes, self.spacing):
            margin = np.ceil((factor - 1.0) * (ax[-1] - ax[0]) / (2.0 * h) - 1e-12)
            m = max(int(margin), 0)
            left = ax[0] + h * np.arange(-m, 0)
            right = ax[-1] + h * np.arange(1, m + 1)
            axes.append(np.concatenate([left, ax, right]))
            slices.append(slice(m, m + ax.size))
        return Grid(axes), tuple(slices)

    def meshgrid(self) -> np.ndarray:
        """Node coordinates, shape (*shape, dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for axis in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[axis] = 0
            mask[tuple(sl)] = False
            sl[axis] = -1
            mask[tuple(sl)] = False
        return mask

    def center_index(self) -> tuple[int, ...]:
        """Node index closest to the box center (exact for odd node counts)."""
        return tuple(n // 2 for n in self.shape)

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal product weights; they sum to the box volume."""
        weights = None
        for ax, h in zip(self.axes, self.spacing):
            w = np.full(ax.size, h)
            w[0] = w[-1] = h / 2.0
            weights = w if weights is None else np.multiply.outer(weights, w)
        return weights

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.shape == other.shape
            and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
        )

    def __hash__(self):
        return hash((self.shape, self.box))

    def __repr__(self):
        return f"Grid(shape={self.shape}, box={self.box})"


class GridField:
    """Values attached to grid nodes: scalar (*shape) or vector (*shape, d)."""

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape == grid.shape:
            self.components = 1
        elif values.shape == grid.shape + (grid.dim,):
            self.components = grid.dim
        else:
            raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    def restrict(self, slices: tuple[slice, ...], target: Grid) -> "GridField":
        return GridField(target, self.values[slices].copy())

    def __repr__(self):
        kind = "scalar" if self.is_scalar else f"vector[{self.components}]"
        return f"GridField({kind}, grid={self.grid.shape})"


def sample(expr: Expr, grid: Grid) -> GridField:
    """Evaluate an expression at every node; raises on non-finite values."""
    values = expr(grid.meshgrid())
    bad = ~np.isfinite(values)
    if bad.any():
        where = tuple(np.argwhere(bad)[0])
        coords = tuple(float(grid.axes[i][where[i]]) for i in range(grid.dim))
        raise EvaluationError(f"expression '{expr.text}' is not finite", point=coords)
    return GridField(grid, values)


def sample_vector(exprs: list[Expr], grid: Grid) -> GridField:
    values = np.stack([sample(e, grid).values for e in exprs], axis=-1)
    return GridField(grid, values)


def lebesgue_norm(field: GridField, s: float) -> float:
    """L^s norm by trapezoidal quadrature of |field|^s over the box."""
    if not field.is_scalar:
        raise ValueError("lebesgue_norm expects a scalar field")
    if s < 1.0:
        raise ValueError("s must be >= 1")
    weights = field.grid.quadrature_weights()
    integral = float(np.sum(weights * np.abs(field.values) ** s))
    return integral ** (1.0 / s)


def integrate(field: GridField) -> float:
    """Trapezoidal integral of a scalar field over the box."""
    if not field.is_scalar:
        raise ValueError("integrate expects a scalar field")
    return float(np.sum(field.grid.quadrature_weights() * field.values))


def vector_magnitude(field: GridField) -> GridField:
    """Pointwise Euclidean norm of a vector field."""
    if field.is_scalar:
        raise ValueError("vector_magnitude expects a vector field")
    return GridField(field.grid, np.linalg.norm(field.values, axis=-1))


def gradient(field: GridField) -> GridField:
    """Central differences inside, second-order one-sided at the boundary."""
    if not field.is_scalar:
        raise ValueError("gradient expects a scalar field")
    grid = field.grid
    parts = [
        np.gradient(field.values, grid.spacing[axis], axis=axis, edge_order=2)
        for axis in range(grid.dim)
    ]
    return GridField(grid, np.stack(parts, axis=-1))


def _second_diff(values: np.ndarray, h: float, axis: int, one_sided_edges: bool) -> np.ndarray:
    """3-point second derivative along `axis`; edges one-sided or NaN."""
    v = np.moveaxis(values, axis, 0)
    out = np.full_like(v, np.nan)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    if one_sided_edges:
        if v.shape[0] >= 4:
            out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
            out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
        else:
            out[0] = (v[0] - 2.0 * v[1] + v[2]) / h**2
            out[-1] = (v[-1] - 2.0 * v[-2] + v[-3]) / h**2
    return np.moveaxis(out, 0, axis)


class HessianField:
    """Hessian values (*shape, d, d) with the grid attached."""

    def __init__(self, grid: Grid, values: np.ndarray):
        self.grid = grid
        self.values = values


def hessian(field: GridField, fill_boundary: bool = False) -> HessianField:
    """Second-derivative matrix per node, shape (*shape, d, d).

    Diagonal entries use the classic 3-point stencil, mixed entries iterated
    central differences.  Boundary nodes are NaN unless `fill_boundary`, in
    which case one-sided second-order stencils extend the coverage.
    """
    if not field.is_scalar:
        raise ValueError("hessian expects a scalar field")
    grid = field.grid
    d = grid.dim
    out = np.empty(grid.shape + (d, d), dtype=float)
    grads = [
        np.gradient(field.values, grid.spacing[i], axis=i, edge_order=2) for i in range(d)
    ]
    for i in range(d):
        out[..., i, i] = _second_diff(field.values, grid.spacing[i], i, fill_boundary)
        for j in range(i + 1, d):
            mixed = np.gradient(grads[i], grid.spacing[j], axis=j, edge_order=2)
            out[..., i, j] = mixed
            out[..., j, i] = mixed
    if not fill_boundary:
        out[~grid.interior_mask()] = np.nan
    return HessianField(grid, out)


def export_csv(field: GridField, path) -> None:
    """Node coordinates and values as CSV, plus a JSON sidecar header."""
    grid = field.grid
    coords = grid.meshgrid().reshape(-1, grid.dim)
    if field.is_scalar:
        data = field.values.reshape(-1, 1)
        value_names = ["value"]
    else:
        data = field.values.reshape(-1, field.components)
        value_names = [f"value{k + 1}" for k in range(field.components)]
    header = ",".join([f"x{i + 1}" for i in range(grid.dim)] + value_names)
    table = np.hstack([coords, data])
    buf = io.StringIO()
    np.savetxt(buf, table, delimiter=",", header=header, comments="")
    path = str(path)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(buf.getvalue())
    meta = {
        "dim": grid.dim,
        "shape": list(grid.shape),
        "box": [[a, b] for a, b in grid.box],
        "components": field.components,
        "columns": header.split(","),
    }
    with open(path + ".json", "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")
