"""Regenerate the bundled test fixtures in tests/data.

Grids (FBG1): the three exact blow-up profiles sampled around their points
and psi = 0 on [0, 2] x [-1, 1]. Golden CSVs: the `profiles` command output
for each kind at 16 samples.

    python3 scripts/make_fixtures.py [--out tests/data] [--n 256]
"""

import argparse
from pathlib import Path

from axisym_fbp.cli import main as cli_main
from axisym_fbp.fixtures import row
from axisym_fbp.grid import StreamGrid, write_fbg

GRID_ROWS = {"stokes": "type1-stokes", "axis": "type2-axis-profile", "bubble": "type3-bubble"}
PROFILE_SAMPLES = 16
ZERO_N = 64


def zero_fixture(n: int) -> StreamGrid:
    return StreamGrid.from_function(lambda x, y: 0.0 * x, (0.0, 2.0), (-1.0, 1.0), (2 * n + 1, 2 * n + 1))


def make(out: Path, n: int) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, key in GRID_ROWS.items():
        p = out / f"{name}_{n}.fbg"
        write_fbg(p, row(key).grid(n))
        written.append(p)
    p = out / f"zero_{ZERO_N}.fbg"
    write_fbg(p, zero_fixture(ZERO_N))
    written.append(p)
    for kind in ("stokes", "axis", "garabedian"):
        p = out / f"profile_{kind}.csv"
        rc = cli_main(["profiles", "--kind", kind, "--samples", str(PROFILE_SAMPLES), "--out", str(p)])
        if rc:
            raise SystemExit(rc)
        written.append(p)
    return written


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data"))
    ap.add_argument("--n", type=int, default=256)
    a = ap.parse_args()
    for p in make(Path(a.out), a.n):
        print(p)
