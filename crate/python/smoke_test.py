"""Smoke test for the `conan` extension module.

Uses an installed `conan` if there is one, otherwise loads the library built by
`cargo build -p conan-py --features extension-module [--release]`.
"""

import importlib.util
import math
import pathlib
import shutil
import sys
import sysconfig
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load():
    try:
        import conan

        return conan
    except ImportError:
        pass
    for profile in ("release", "debug"):
        lib = ROOT / "target" / profile / "libconan_py.so"
        if lib.exists():
            break
    else:
        sys.exit("libconan_py.so not found; build it with cargo first")
    tmp = pathlib.Path(tempfile.mkdtemp())
    dst = tmp / ("conan" + sysconfig.get_config_var("EXT_SUFFIX"))
    shutil.copy(lib, dst)
    spec = importlib.util.spec_from_file_location("conan", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    conan = load()
    print("conan", conan.__version__)

    g1 = conan.Graph([[0.0], [1.0], [2.0]], [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    g2 = conan.Graph([[0.1], [2.0]], [[0, 1.5], [1.5, 0]], omega=[0.4, 0.6])
    assert g1.validate() == []
    assert abs(sum(g1.omega) - 1.0) < 1e-12

    same = conan.fgw_distance(g1, g1, epsilon=0.01)
    assert same["cost"] <= 1e-2, same
    r = conan.fgw_distance(g1, g2, return_coupling=True)
    assert r["converged"] and r["marginal_err"] < 1e-6
    rows = [sum(row) for row in r["coupling"]]
    assert all(abs(x - w) < 1e-6 for x, w in zip(rows, g1.omega))
    print("fgw cost", r["cost"])

    back = conan.Graph.from_json(g2.to_json())
    assert back.A == g2.A and back.omega == g2.omega

    bar, info = conan.fgw_barycenter([g1, g2], n_bar=3)
    assert bar.n == 3 and len(info["couplings"]) == 2
    swapped, _ = conan.fgw_barycenter([g2, g1], n_bar=3)
    assert swapped.A == bar.A and swapped.H == bar.H

    s = conan.sinkhorn([[0, 1], [1, 0]], [0.5, 0.5], [0.5, 0.5], 0.1)
    assert abs(s["pi"][0][0] - 0.5 / (1 + math.exp(-10))) < 1e-9

    xyz = "3\na\nO 0 0 0\nH 0.96 0 0\nH -0.24 0.93 0\n3\nb\nO 0 0 0.05\nH 0.95 0.03 0\nH -0.26 0.91 0\n"
    assert conan.parse_xyz(xyz)[0][0] == [8, 1, 1]
    out = conan.conan_forward([[1, 0], [0, 1], [0, 1]], [(0, 1), (0, 2)], xyz, seed=3)
    assert math.isfinite(out["y_hat"]) and len(out["h3d"]) == 2
    print("y_hat", out["y_hat"])

    try:
        conan.Graph([[0.0], [1.0]], [[0, 1], [2, 0]], omega=[0.6, 0.6])
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("invalid graph accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
