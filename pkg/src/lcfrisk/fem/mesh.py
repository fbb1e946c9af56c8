"""Volume meshes, boundary faces and the plain-text mesh format.

File format (``.msh``, whitespace separated, ``#`` starts a comment)::

    LCFRISK-MESH 1
    NODES <n>
    <node id> <x> <y> <z>            # n lines
    ELEMENTS <m> <kind>
    <element id> <node id> ...       # m lines, VTK local node order
    FACES <k>
    <element id> <local face> <tag>  # k lines, optional tags
    END

Node and element ids are arbitrary integers; they are renumbered to
0-based positions on load. Every boundary face not listed under ``FACES``
receives the tag ``free``. Local face numbering is documented in
:mod:`lcfrisk.fem.elements`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshError, MeshIOError
from .elements import ElementKind, get_kind, quadratic_partner

DEFAULT_TAG = "free"
MAGIC = "LCFRISK-MESH"


@dataclass
class VolumeMesh:
    """Homogeneous Lagrange mesh with tagged boundary faces.

    Attributes
    ----------
    nodes : ndarray, shape (N, 3)
    elements : ndarray of int, shape (M, n_nodes_per_element)
    kind : ElementKind
    face_tags : dict
        ``(element, local_face) -> tag`` for boundary faces; untagged
        boundary faces default to ``"free"``.
    """

    nodes: np.ndarray
    elements: np.ndarray
    kind: ElementKind
    face_tags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise MeshError(f"nodes must have shape (N, 3), got {self.nodes.shape}")
        if self.elements.ndim != 2 or self.elements.shape[1] != self.kind.n_nodes:
            raise MeshError(
                f"{self.kind.name} elements need {self.kind.n_nodes} nodes, "
                f"got shape {self.elements.shape}"
            )
        self._boundary = None

    # -- topology -----------------------------------------------------------
    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    def _compute_boundary(self):
        nc = self.kind.n_face_corners
        seen = {}
        for e, conn in enumerate(self.elements):
            for lf, fl in enumerate(self.kind.faces):
                key = tuple(sorted(conn[list(fl[:nc])]))
                seen.setdefault(key, []).append((e, lf))
        bad = [k for k, v in seen.items() if len(v) > 2]
        if bad:
            raise MeshError(f"non-manifold face shared by >2 elements: nodes {bad[0]}")
        bnd = sorted(v[0] for v in seen.values() if len(v) == 1)
        elem = np.array([b[0] for b in bnd], dtype=np.int64)
        lface = np.array([b[1] for b in bnd], dtype=np.int64)
        unknown = set(self.face_tags) - set(bnd)
        if unknown:
            e, lf = sorted(unknown)[0]
            raise MeshError(f"tagged face (element {e}, local face {lf}) is not on the boundary")
        tags = np.array([self.face_tags.get(b, DEFAULT_TAG) for b in bnd], dtype=object)
        self._boundary = (elem, lface, tags)

    @property
    def boundary(self):
        """``(element, local_face, tag)`` arrays; face id = position."""
        if self._boundary is None:
            self._compute_boundary()
        return self._boundary

    @property
    def n_boundary_faces(self):
        return len(self.boundary[0])

    def face_nodes(self, face_ids=None):
        """Global node ids of boundary faces, shape (nf, nodes_per_face)."""
        elem, lface, _ = self.boundary
        if face_ids is not None:
            elem, lface = elem[face_ids], lface[face_ids]
        faces = np.array(self.kind.faces)
        return self.elements[elem[:, None], faces[lface]]

    def tags(self):
        return sorted(set(self.boundary[2]))

    def faces_with_tags(self, tags):
        tags = {tags} if isinstance(tags, str) else set(tags)
        return np.nonzero([t in tags for t in self.boundary[2]])[0]

    def nodes_on_tags(self, tags):
        ids = self.faces_with_tags(tags)
        if len(ids) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(self.face_nodes(ids).ravel())

    # -- geometry -----------------------------------------------------------
    def jacobians(self, xi=None):
        """Jacobian matrices ``d x / d xi`` at reference points, (M, npts, 3, 3)."""
        if xi is None:
            xi = self.kind.volume_rule.points
        dN = self.kind.shape_grad(xi)
        X = self.nodes[self.elements]
        return np.einsum("mna,qnb->mqab", X, dN)

    def validate(self):
        """Check node references and positive Jacobians at volume Gauss points."""
        if self.elements.min() < 0 or self.elements.max() >= self.n_nodes:
            bad = np.nonzero((self.elements < 0) | (self.elements >= self.n_nodes))[0][0]
            raise MeshError(f"element {bad} references a missing node")
        det = np.linalg.det(self.jacobians())
        bad = np.nonzero(~(det > 0).all(axis=1))[0]
        if len(bad):
            raise MeshError(
                f"inverted element {int(bad[0])} (min Jacobian {det[bad[0]].min():.3e})"
            )
        self.boundary  # noqa: B018 - forces boundary/tag validation
        return self

    def volume(self):
        det = np.linalg.det(self.jacobians())
        return float((det * self.kind.volume_rule.weights).sum())

    def with_nodes(self, nodes):
        """Same topology and tags with moved nodes (boundary cache kept)."""
        m = VolumeMesh(np.asarray(nodes, float), self.elements, self.kind, dict(self.face_tags))
        m._boundary = self._boundary
        return m

    def retag(self, fn):
        """Return a copy whose boundary tags are ``fn(face_id, centroid, tag)``."""
        elem, lface, tags = self.boundary
        cent = self.nodes[self.face_nodes()].mean(axis=1)
        new = {}
        for i, (e, lf) in enumerate(zip(elem, lface)):
            t = fn(i, cent[i], tags[i])
            if t != DEFAULT_TAG:
                new[(int(e), int(lf))] = t
        return VolumeMesh(self.nodes, self.elements, self.kind, new)


def _edge_key(a, b):
    return (a, b) if a < b else (b, a)


def promote_quadratic(mesh: VolumeMesh) -> VolumeMesh:
    """Insert straight-edge mid-nodes: tet4 -> tet10, hex8 -> hex20."""
    kind = quadratic_partner(mesh.kind)
    mids = {}
    new_nodes = [mesh.nodes]
    extra = []
    conn = np.empty((mesh.n_elements, kind.n_nodes), dtype=np.int64)
    conn[:, : mesh.kind.n_nodes] = mesh.elements
    nxt = mesh.n_nodes
    for e, c in enumerate(mesh.elements):
        for k, (i, j) in enumerate(kind.edges):
            key = _edge_key(c[i], c[j])
            if key not in mids:
                mids[key] = nxt
                extra.append(0.5 * (mesh.nodes[c[i]] + mesh.nodes[c[j]]))
                nxt += 1
            conn[e, mesh.kind.n_nodes + k] = mids[key]
    if extra:
        new_nodes.append(np.array(extra))
    return VolumeMesh(np.vstack(new_nodes), conn, kind, dict(mesh.face_tags))


# children of a refined tet4 as local indices into [0..3 corners, 4..9 edge mids]
_TET_CHILDREN = [
    (0, 4, 6, 7), (4, 1, 5, 8), (6, 5, 2, 9), (7, 8, 9, 3),
    (4, 5, 6, 8), (4, 6, 7, 8), (6, 5, 9, 8), (6, 9, 7, 8),
]


def refine(mesh: VolumeMesh) -> VolumeMesh:
    """Uniform refinement of linear meshes (each element split into 8).

    Boundary tags are inherited by the child faces.
    """
    kind = mesh.kind
    if kind.name not in ("tet4", "hex8"):
        raise MeshError(f"refinement supports tet4 and hex8 meshes, not {kind.name}")
    nodes = [*mesh.nodes]
    cache = {}

    def mid(ids):
        key = tuple(sorted(int(i) for i in ids))
        if key not in cache:
            cache[key] = len(nodes)
            nodes.append(np.mean([mesh.nodes[i] for i in key], axis=0))
        return cache[key]

    children = []
    parent = []
    for e, c in enumerate(mesh.elements):
        if kind.name == "tet4":
            loc = list(c) + [mid((c[i], c[j])) for i, j in kind.edges]
            for ch in _TET_CHILDREN:
                children.append([loc[k] for k in ch])
                parent.append(e)
        else:
            g = {}
            for a in (0, 1, 2):
                for b in (0, 1, 2):
                    for d in (0, 1, 2):
                        # which parent corners surround this lattice point
                        sel = [
                            k for k, r in enumerate(kind.ref_nodes)
                            if (a == 1 or r[0] == a - 1) and (b == 1 or r[1] == b - 1)
                            and (d == 1 or r[2] == d - 1)
                        ]
                        g[a, b, d] = int(c[sel[0]]) if len(sel) == 1 else mid(c[sel])
            for a in (0, 1):
                for b in (0, 1):
                    for d in (0, 1):
                        children.append([
                            g[a + int(r[0] > 0), b + int(r[1] > 0), d + int(r[2] > 0)]
                            for r in kind.ref_nodes
                        ])
                        parent.append(e)
    children = np.array(children, dtype=np.int64)
    nodes = np.array(nodes)
    # fix child orientation for tets (split diagonal may flip)
    if kind.name == "tet4":
        X = nodes[children]
        vol = np.einsum("ij,ij->i", np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]), X[:, 3] - X[:, 0])
        flip = vol < 0
        children[flip] = children[flip][:, [0, 2, 1, 3]]
    child = VolumeMesh(nodes, children, kind)
    # inherit tags: child boundary face lies in the parent face with the same plane
    pe, plf, ptag = mesh.boundary
    parent_face_nodes = mesh.face_nodes()
    by_parent = {}
    for fid, (e, lf) in enumerate(zip(pe, plf)):
        closure = set(int(i) for i in parent_face_nodes[fid])
        for key, idx in cache.items():
            if set(key) <= closure:
                closure.add(idx)
        by_parent.setdefault(int(e), []).append((closure, ptag[fid]))
    ce, clf, _ = child.boundary
    cfn = child.face_nodes()
    parent = np.array(parent)
    tags = {}
    for fid, (e, lf) in enumerate(zip(ce, clf)):
        corners = set(int(i) for i in cfn[fid][: kind.n_face_corners])
        for closure, tag in by_parent.get(int(parent[e]), []):
            if corners <= closure:
                if tag != DEFAULT_TAG:
                    tags[(int(e), int(lf))] = tag
                break
    return VolumeMesh(nodes, children, kind, tags)


# -- file IO ------------------------------------------------------------------
def _tokens(path):
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield ln, line.split()


def load_mesh(path) -> VolumeMesh:
    """Read and validate a mesh in the plain-text format described above."""
    path = Path(path)
    if not path.exists():
        raise MeshIOError("file not found", path)
    it = _tokens(path)

    def expect(word):
        try:
            ln, tok = next(it)
        except StopIteration:
            raise MeshIOError(f"unexpected end of file, expected {word}", path) from None
        if tok[0] != word:
            raise MeshIOError(f"expected {word}, found {tok[0]!r}", path, ln)
        return ln, tok

    def row(n_expected, what):
        try:
            ln, tok = next(it)
        except StopIteration:
            raise MeshIOError(f"unexpected end of file in {what} block", path) from None
        if len(tok) != n_expected:
            raise MeshIOError(
                f"{what} line needs {n_expected} fields, found {len(tok)}", path, ln
            )
        return ln, tok

    ln, tok = expect(MAGIC)
    if len(tok) < 2 or tok[1] != "1":
        raise MeshIOError("unsupported format version", path, ln)
    try:
        ln, tok = expect("NODES")
        n = int(tok[1])
        node_ids, coords = {}, np.empty((n, 3))
        for k in range(n):
            ln, t = row(4, "NODES")
            if t[0] in node_ids:
                raise MeshIOError(f"duplicate node id {t[0]}", path, ln)
            node_ids[t[0]] = k
            coords[k] = [float(v) for v in t[1:]]
        ln, tok = expect("ELEMENTS")
        m = int(tok[1])
        kind = get_kind(tok[2]) if len(tok) > 2 else None
        if kind is None:
            raise MeshIOError("ELEMENTS header needs an element kind", path, ln)
        elem_ids, conn = {}, np.empty((m, kind.n_nodes), dtype=np.int64)
        for k in range(m):
            ln, t = row(kind.n_nodes + 1, "ELEMENTS")
            elem_ids[t[0]] = k
            try:
                conn[k] = [node_ids[v] for v in t[1:]]
            except KeyError as exc:
                raise MeshIOError(f"element {t[0]} references unknown node {exc.args[0]}", path, ln) from None
        tags = {}
        ln, tok = next(it)
        if tok[0] == "FACES":
            for _ in range(int(tok[1])):
                ln, t = row(3, "FACES")
                if t[0] not in elem_ids:
                    raise MeshIOError(f"face references unknown element {t[0]}", path, ln)
                lf = int(t[1])
                if not 0 <= lf < len(kind.faces):
                    raise MeshIOError(f"local face {lf} out of range for {kind.name}", path, ln)
                tags[(elem_ids[t[0]], lf)] = t[2]
            ln, tok = next(it)
        if tok[0] != "END":
            raise MeshIOError(f"expected END, found {tok[0]!r}", path, ln)
    except StopIteration:
        raise MeshIOError("unexpected end of file", path) from None
    except ValueError as exc:
        if isinstance(exc, MeshIOError):
            raise
        raise MeshIOError(str(exc), path, ln) from None
    mesh = VolumeMesh(coords, conn, kind, tags)
    return mesh.validate()


def save_mesh(mesh: VolumeMesh, path, comment=None):
    """Write ``mesh`` in the plain-text format (coordinates at full precision)."""
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"{MAGIC} 1")
    lines.append(f"NODES {mesh.n_nodes}")
    lines += [f"{i} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.nodes.tolist())]
    lines.append(f"ELEMENTS {mesh.n_elements} {mesh.kind.name}")
    lines += [f"{i} " + " ".join(map(str, c)) for i, c in enumerate(mesh.elements.tolist())]
    tagged = sorted(mesh.face_tags.items())
    lines.append(f"FACES {len(tagged)}")
    lines += [f"{e} {lf} {t}" for (e, lf), t in tagged]
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")
