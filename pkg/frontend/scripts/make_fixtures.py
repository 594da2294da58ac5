"""Regenerate the shared FK fixtures consumed by the editor's tests.

Run from the repository root with the motionfield package installed:
    python3 frontend/scripts/make_fixtures.py
"""

import json
from pathlib import Path

import numpy as np

from motionfield.kinematics import forward_kinematics
from motionfield.motion import NEUTRAL_ROOT
from motionfield.rotations import matrix_to_rot6d, rot6d_to_matrix
from motionfield.synth import GaitParams, biped_skeleton, generate_walk


def main() -> None:
    rng = np.random.default_rng(2024)
    skeleton = biped_skeleton()
    cases = []

    # rest pose at neutral heading (the root's +y maps to world up)
    xr_rest = np.tile([1.0, 0, 0, 0, 1, 0], (skeleton.n_joints, 1))
    cases.append(("rest", xr_rest, matrix_to_rot6d(NEUTRAL_ROOT),
                  np.array([0.0, 0.0, 88.0])))

    # frames of a generated walk
    walk = generate_walk(GaitParams(stride_len=26.0, turn_rate=0.3), 64, 30.0)
    for frame in (0, 17, 40, 63):
        cases.append((f"walk-{frame}", walk.xr[frame], walk.ro[frame], walk.root_pos[frame]))

    # random valid poses
    for i in range(6):
        xr = np.stack([matrix_to_rot6d(_random_rotation(rng)) for _ in range(skeleton.n_joints)])
        ro = matrix_to_rot6d(_random_rotation(rng))
        root = rng.normal(size=3) * 40 + np.array([0, 0, 90.0])
        cases.append((f"random-{i}", xr, ro, root))

    out = {"skeleton": skeleton.to_dict(), "cases": []}
    for name, xr, ro, root in cases:
        local = forward_kinematics(skeleton, rot6d_to_matrix(xr), np.zeros(3))
        world = root + np.einsum("ij,kj->ki", rot6d_to_matrix(ro), local)
        out["cases"].append({
            "name": name,
            "xr": np.asarray(xr).tolist(),
            "ro": np.asarray(ro).tolist(),
            "root_pos": np.asarray(root).tolist(),
            "local_positions": local.tolist(),
            "world_positions": world.tolist(),
        })

    path = Path(__file__).resolve().parent.parent / "fixtures" / "fk_fixtures.json"
    path.write_text(json.dumps(out, indent=1))
    print(f"wrote {len(out['cases'])} cases to {path}")


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1
    return q


if __name__ == "__main__":
    main()
