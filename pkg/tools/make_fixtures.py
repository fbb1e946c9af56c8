"""Regenerate the bundled meshes, their manifest and the example configs.

Usage: python3 tools/make_fixtures.py [output_dir]
"""

import json
import sys
from pathlib import Path

from lcfrisk.fem import save_mesh
from lcfrisk.fem.meshgen import ball_mesh, box_mesh, facet_area, notched_bar

MESHES = {
    "unit_cube_tet4": lambda: box_mesh("tet4", (2, 2, 2)),
    "bar_hex8": lambda: box_mesh("hex8", (4, 1, 1), (4.0, 1.0, 1.0)),
    "notched_bar_hex8": lambda: notched_bar("hex8"),
    "notched_bar_tet4": lambda: notched_bar("tet4"),
    "ball_tet4": lambda: ball_mesh("tet4", 4),
}

MATERIAL = """\
[material]
E = 200000.0
nu = 0.3
K = 1200.0
n_prime = 0.15
sigma_f_prime = 1000.0
eps_f_prime = 0.5
b = -0.09
c = -0.6
units = "MPa"
"""

CONFIGS = {
    "patch_bar.toml": MATERIAL + """
[mesh]
path = "bar_hex8.msh"

[loads]
dirichlet = { x0 = [0], y0 = [1], z0 = [2] }
traction = { x1 = [600.0, 0.0, 0.0] }

[statistics]
model = "weibull"
m_bar = 2.0
times = [1000.0, 10000.0, 100000.0]
""",
    "notched_bar.toml": MATERIAL + """
[mesh]
path = "notched_bar_hex8.msh"

[loads]
dirichlet = { fixed = [0, 1, 2] }
traction = { load = [600.0, 0.0, 0.0] }

[solver]
method = "direct"
tol = 1e-10

[statistics]
model = "weibull"
m_bar = 2.0
times = [1000.0, 10000.0, 100000.0]

[gradcheck]
h = 1e-4
fields = [
    { name = "notch_normal", type = "normal", center = [5.0, 1.5, 0.75], width = 1.0 },
    { name = "bottom_normal", type = "normal", center = [5.0, 0.0, 0.75], width = 1.5 },
    { name = "end_normal", type = "normal", center = [8.0, 1.0, 1.5], width = 1.5 },
    { name = "notch_tangential", type = "tangential", center = [5.0, 1.5, 0.75], width = 1.0, direction = [1.0, 0.0, 0.0] },
]
""",
    "schmid_uniaxial.toml": MATERIAL + """
[microstructure]
stress = [600.0, 0.0, 0.0]
n_samples = 10000
bins = 40

[run]
seed = 20240601
threads = 1
""",
    "service_golden.toml": """\
[service]
eta = 2000.0
m = 2.4
income = 50.0
service_cost = 300.0
failure_cost = 500000.0
i_eff = 0.003
outage = 30.0
tol = 1e-6
""",
    "sweep.toml": """\
[service]
eta = 2000.0
m = 2.4
income = 50.0
service_cost = 300.0
failure_cost = 500000.0
i_eff = 0.003
outage = 30.0
incomes = [25.0, 50.0, 100.0]
""",
    "pof.toml": """\
[statistics]
model = "weibull"
eta = 2000.0
m_bar = 2.4
times = [100.0, 500.0, 1000.0, 2000.0, 5000.0]
""",
}


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, make in MESHES.items():
        mesh = make()
        save_mesh(mesh, out / f"{name}.msh", comment=f"{name}: generated by tools/make_fixtures.py")
        manifest[name] = {
            "file": f"{name}.msh",
            "kind": mesh.kind.name,
            "nodes": int(mesh.n_nodes),
            "elements": int(mesh.n_elements),
            "boundary_faces": int(mesh.n_boundary_faces),
            "tags": sorted(mesh.tags()),
            "volume": float(mesh.volume()),
            "facet_area": float(facet_area(mesh)),
        }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for name, text in CONFIGS.items():
        (out / name).write_text(text)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src" / "lcfrisk" / "data")
