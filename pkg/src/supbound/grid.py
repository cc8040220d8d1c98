"""Voxelized open sets in R^3 and the discrete calculus on them.

A domain is a uniform Cartesian grid with spacing ``h`` and a boolean mask of
interior nodes.  Grid functions live on the interior nodes and are implicitly
zero everywhere else, which encodes zero boundary values exactly: the 7-point
Laplacian and the forward-difference Dirichlet energy then satisfy the
summation-by-parts identity

    grad_norm_sq(u) = -l2_inner(u, laplacian(u))

to machine rounding.  Norms and inner products use the node quadrature weight
``h**3``.
"""

import enum
import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse


class GridError(ValueError):
    """Invalid domain or field construction."""


class Shape(str, enum.Enum):
    BOX = "box"
    LSHAPE = "lshape"
    BALL = "ball"
    CUSTOM = "custom"


_SHAPE_CODES = {Shape.BOX: 0, Shape.LSHAPE: 1, Shape.BALL: 2, Shape.CUSTOM: 3}
_SHAPE_FROM_CODE = {v: k for k, v in _SHAPE_CODES.items()}

FIELD_MAGIC = b"SBF1"


@dataclass(eq=False)
class VoxelDomain:
    """An open set discretized as an interior-node mask with uniform spacing.

    Nodes sit at coordinates ``i*h`` per axis.  The outermost node layer is
    always boundary, so every interior node has its six stencil neighbours
    inside the array.
    """

    dims: tuple[int, int, int]
    h: float
    interior_mask: np.ndarray
    shape_tag: Shape = Shape.CUSTOM
    _packed_index: np.ndarray = field(init=False, repr=False)
    _neighbors: np.ndarray | None = field(default=None, init=False, repr=False)
    _neg_lap: sparse.csr_matrix | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or any(d < 3 for d in self.dims):
            raise GridError(f"need at least 3 nodes per axis, got dims={self.dims}")
        if not self.h > 0:
            raise GridError(f"spacing must be positive, got h={self.h}")
        mask = np.asarray(self.interior_mask, dtype=bool)
        if mask.shape != self.dims:
            raise GridError(f"mask shape {mask.shape} does not match dims {self.dims}")
        margin = mask.copy()
        margin[1:-1, 1:-1, 1:-1] = False
        if margin.any():
            raise GridError("interior mask touches the one-node ghost margin")
        if not mask.any():
            raise GridError("domain has no interior nodes")
        mask.setflags(write=False)
        self.interior_mask = mask
        packed = np.full(self.dims, -1, dtype=np.int64)
        packed[mask] = np.arange(mask.sum())
        packed.setflags(write=False)
        self._packed_index = packed

    @property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    def compatible(self, other: "VoxelDomain") -> bool:
        return self is other or (
            self.dims == other.dims
            and self.h == other.h
            and np.array_equal(self.interior_mask, other.interior_mask)
        )

    def node_coords(self, node: tuple[int, int, int]) -> np.ndarray:
        return np.asarray(node, dtype=float) * self.h

    def is_interior(self, node: tuple[int, int, int]) -> bool:
        i, j, k = node
        return bool(self.interior_mask[i, j, k])

    def packed_index(self, node: tuple[int, int, int]) -> int:
        """Position of an interior node in the packed value array."""
        i, j, k = node
        idx = int(self._packed_index[i, j, k])
        if idx < 0:
            raise GridError(f"node {tuple(node)} is not interior")
        return idx

    def interior_nodes(self) -> np.ndarray:
        """(n_interior, 3) integer node indices, in packed order."""
        return np.argwhere(self.interior_mask)

    def to_dense(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dims)
        out[self.interior_mask] = values
        return out

    def pack(self, dense: np.ndarray) -> np.ndarray:
        return np.asarray(dense, dtype=float)[self.interior_mask]

    def neg_laplacian_matrix(self) -> sparse.csr_matrix:
        """-Delta_h on packed interior values, zero Dirichlet; cached."""
        if self._neg_lap is None:
            n = self.n_interior
            nodes = self.interior_nodes()
            rows = [np.arange(n)]
            cols = [np.arange(n)]
            vals = [np.full(n, 6.0)]
            for axis in range(3):
                for sign in (-1, 1):
                    nb = nodes.copy()
                    nb[:, axis] += sign
                    nb_idx = self._packed_index[nb[:, 0], nb[:, 1], nb[:, 2]]
                    ok = nb_idx >= 0
                    rows.append(np.arange(n)[ok])
                    cols.append(nb_idx[ok])
                    vals.append(np.full(ok.sum(), -1.0))
            mat = sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n, n),
            )
            self._neg_lap = mat * (1.0 / self.h**2)
        return self._neg_lap


@dataclass(eq=False)
class ScalarField:
    """Grid function on the interior nodes of a domain, zero outside."""

    domain: VoxelDomain
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.domain.n_interior,):
            raise GridError(
                f"expected {self.domain.n_interior} interior values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("field contains non-finite values")
        vals.setflags(write=False)
        self.values = vals

    def to_dense(self) -> np.ndarray:
        return self.domain.to_dense(self.values)

    def value_at(self, node: tuple[int, int, int]) -> float:
        return float(self.values[self.domain.packed_index(node)])

    def _check_same_domain(self, other: "ScalarField"):
        if not self.domain.compatible(other.domain):
            raise GridError("fields live on different domains")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check_same_domain(other)
        return ScalarField(self.domain, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check_same_domain(other)
        return ScalarField(self.domain, self.values - other.values)

    def __mul__(self, alpha: float) -> "ScalarField":
        return ScalarField(self.domain, self.values * float(alpha))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.domain, -self.values)


@dataclass(eq=False)
class VectorField3:
    """Three scalar components on one shared domain."""

    components: tuple[ScalarField, ScalarField, ScalarField]

    def __post_init__(self):
        if len(self.components) != 3:
            raise GridError("vector field needs exactly 3 components")
        d = self.components[0].domain
        for c in self.components[1:]:
            if not d.compatible(c.domain):
                raise GridError("vector components live on different domains")
        self.components = tuple(self.components)

    @property
    def domain(self) -> VoxelDomain:
        return self.components[0].domain

    def __add__(self, other: "VectorField3") -> "VectorField3":
        return VectorField3(tuple(a + b for a, b in zip(self.components, other.components)))

    def __mul__(self, alpha: float) -> "VectorField3":
        return VectorField3(tuple(c * alpha for c in self.components))

    __rmul__ = __mul__


def zeros(domain: VoxelDomain) -> ScalarField:
    return ScalarField(domain, np.zeros(domain.n_interior))


def from_function(domain: VoxelDomain, f) -> ScalarField:
    """Sample f(x, y, z) at interior nodes."""
    nodes = domain.interior_nodes() * domain.h
    return ScalarField(domain, f(nodes[:, 0], nodes[:, 1], nodes[:, 2]))


def build_domain(
    shape: Shape | str,
    dims: int | tuple[int, int, int],
    h: float,
    radius: float | None = None,
    mask: np.ndarray | None = None,
) -> VoxelDomain:
    """Construct a domain fixture.

    box      : full interior behind the one-node margin.
    lshape   : box minus the quadrant {x >= cx, y >= cy}, extruded along z,
               leaving a reentrant edge.
    ball     : nodes with |x - center| < radius (default: largest ball that
               fits behind the margin).
    custom   : caller-supplied interior mask.
    """
    shape = Shape(shape)
    if isinstance(dims, int):
        dims = (dims, dims, dims)
    dims = tuple(int(d) for d in dims)
    if any(d < 3 for d in dims):
        raise GridError(f"need at least 3 nodes per axis, got dims={dims}")
    if not h > 0:
        raise GridError(f"spacing must be positive, got h={h}")

    interior = np.zeros(dims, dtype=bool)
    interior[1:-1, 1:-1, 1:-1] = True
    if shape is Shape.BOX:
        pass
    elif shape is Shape.LSHAPE:
        cx, cy = dims[0] // 2, dims[1] // 2
        interior[cx:, cy:, :] = False
    elif shape is Shape.BALL:
        if radius is None:
            radius = (min(dims) - 2) / 2.0 * h
        center = (np.asarray(dims, dtype=float) - 1.0) / 2.0 * h
        ii, jj, kk = np.meshgrid(*(np.arange(d) for d in dims), indexing="ij")
        dist = np.sqrt(
            (ii * h - center[0]) ** 2 + (jj * h - center[1]) ** 2 + (kk * h - center[2]) ** 2
        )
        interior &= dist < radius
    elif shape is Shape.CUSTOM:
        if mask is None:
            raise GridError("custom shape needs an explicit interior mask")
        interior &= np.asarray(mask, dtype=bool)
    if not interior.any():
        raise GridError(f"{shape.value} spec produced an empty interior")
    return VoxelDomain(dims, float(h), interior, shape)


def unit_box(n: int) -> VoxelDomain:
    """Box domain on [0,1]^3 with n nodes per axis (h = 1/(n-1))."""
    return build_domain(Shape.BOX, n, 1.0 / (n - 1))


# ---------------------------------------------------------------------------
# discrete calculus


def laplacian(u: ScalarField) -> ScalarField:
    """7-point stencil (sum of the 6 neighbours - 6u)/h^2 with zero extension."""
    d = u.domain
    U = u.to_dense()
    core = (
        U[2:, 1:-1, 1:-1]
        + U[:-2, 1:-1, 1:-1]
        + U[1:-1, 2:, 1:-1]
        + U[1:-1, :-2, 1:-1]
        + U[1:-1, 1:-1, 2:]
        + U[1:-1, 1:-1, :-2]
        - 6.0 * U[1:-1, 1:-1, 1:-1]
    ) / d.h**2
    full = np.zeros(d.dims)
    full[1:-1, 1:-1, 1:-1] = core
    return ScalarField(d, d.pack(full))


def grad_norm_sq(u: ScalarField) -> float:
    """Dirichlet energy: forward differences summed with weight h^3.

    Differences across the boundary are included via the zero extension; the
    all-boundary margin makes the sum over in-array differences complete.
    """
    U = u.to_dense()
    total = 0.0
    for axis in range(3):
        dU = np.diff(U, axis=axis)
        total += float(np.sum(dU * dU))
    return total * u.domain.h


def l2_norm_sq(u: ScalarField) -> float:
    return float(np.sum(u.values * u.values)) * u.domain.h**3


def l2_norm(u: ScalarField) -> float:
    return np.sqrt(l2_norm_sq(u))


def sup_norm(u: ScalarField) -> float:
    return float(np.max(np.abs(u.values))) if u.values.size else 0.0


def l2_inner(u: ScalarField, v: ScalarField) -> float:
    u._check_same_domain(v)
    return float(np.dot(u.values, v.values)) * u.domain.h**3


# ---------------------------------------------------------------------------
# depth transforms (used to center embedded profiles and pick probe points)


def interior_depth_hops(domain: VoxelDomain) -> np.ndarray:
    """Breadth-first (6-neighbour) hop count to the nearest non-interior node,
    over the full grid (0 outside the interior)."""
    return ndimage.distance_transform_cdt(domain.interior_mask, metric="taxicab")


def boundary_clearance(domain: VoxelDomain) -> np.ndarray:
    """Euclidean distance (in units of h) to the nearest non-interior node."""
    return ndimage.distance_transform_edt(domain.interior_mask)


def deepest_interior_node(domain: VoxelDomain) -> tuple[int, int, int]:
    """Interior node maximizing the BFS depth; ties broken by lowest index."""
    depth = interior_depth_hops(domain)
    flat = int(np.argmax(depth))  # argmax returns the first (lowest C-order) max
    return tuple(int(v) for v in np.unravel_index(flat, domain.dims))


# ---------------------------------------------------------------------------
# serialization


def parse_domain_config(text: str) -> VoxelDomain:
    """Build a domain from a line-oriented config.

    Lines are ``key = value``; '#' starts a comment.  Keys: shape, dims
    (one or three integers), h, radius (optional, ball only).
    """
    entries: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GridError(f"bad config line: {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        entries[key.lower()] = val
    missing = {"shape", "dims", "h"} - entries.keys()
    if missing:
        raise GridError(f"domain config missing keys: {sorted(missing)}")
    try:
        shape = Shape(entries["shape"].lower())
    except ValueError:
        raise GridError(f"unknown shape {entries['shape']!r}") from None
    parts = entries["dims"].split()
    if len(parts) == 1:
        dims = (int(parts[0]),) * 3
    elif len(parts) == 3:
        dims = tuple(int(p) for p in parts)
    else:
        raise GridError(f"dims needs 1 or 3 integers, got {entries['dims']!r}")
    radius = float(entries["radius"]) if "radius" in entries else None
    return build_domain(shape, dims, float(entries["h"]), radius=radius)


def load_domain_config(path) -> VoxelDomain:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_domain_config(fh.read())


def field_to_bytes(u: ScalarField) -> bytes:
    """Flat binary layout: magic, dims (3 x uint32), h, shape code, then the
    dense row-major float64 payload (zeros outside the interior)."""
    d = u.domain
    buf = io.BytesIO()
    buf.write(FIELD_MAGIC)
    buf.write(struct.pack("<3Id B", *d.dims, d.h, _SHAPE_CODES[d.shape_tag]))
    buf.write(u.to_dense().astype("<f8").tobytes(order="C"))
    return buf.getvalue()


def field_from_bytes(data: bytes, domain: VoxelDomain | None = None) -> ScalarField:
    """Inverse of field_to_bytes.

    If ``domain`` is given it must match the header and the payload must
    vanish off its interior.  Otherwise the domain is rebuilt from the header,
    which works for box and lshape tags (ball and custom masks are not
    recoverable from the header alone).
    """
    header = struct.Struct("<3Id B")
    if data[:4] != FIELD_MAGIC:
        raise GridError("bad field magic")
    nx, ny, nz, h, code = header.unpack_from(data, 4)
    dims = (nx, ny, nz)
    shape = _SHAPE_FROM_CODE.get(code)
    if shape is None:
        raise GridError(f"unknown shape code {code}")
    if domain is None:
        if shape not in (Shape.BOX, Shape.LSHAPE):
            raise GridError(f"cannot rebuild a {shape.value} domain from the header alone")
        domain = build_domain(shape, dims, h)
    else:
        if domain.dims != dims or domain.h != h or domain.shape_tag is not shape:
            raise GridError("field header does not match the supplied domain")
    payload = np.frombuffer(data, dtype="<f8", offset=4 + header.size)
    if payload.size != nx * ny * nz:
        raise GridError("field payload truncated")
    dense = payload.reshape(dims)
    if np.any(dense[~domain.interior_mask] != 0.0):
        raise GridError("payload has nonzero values outside the interior")
    return ScalarField(domain, domain.pack(dense))


def field_to_csv(u: ScalarField, path) -> None:
    """Inspection CSV: one interior node per row."""
    nodes = u.domain.interior_nodes()
    h = u.domain.h
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,j,k,x,y,z,value\n")
        for (i, j, k), v in zip(nodes, u.values):
            fh.write(f"{i},{j},{k},{i*h!r},{j*h!r},{k*h!r},{v!r}\n")
