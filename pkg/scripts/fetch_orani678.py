#!/usr/bin/env python3
"""Download the orani678 benchmark matrix from the SuiteSparse collection.

The matrix is not vendored with the package; the acceptance test that uses
it skips when the file is absent. Run this script once to enable it:

    python scripts/fetch_orani678.py [DEST_DIR]

The file lands in DEST_DIR/orani678.mtx (default: <repo>/data). Set
SINGDIST_ORANI678 to point the tests at a file somewhere else.
"""

import io
import pathlib
import sys
import tarfile
import urllib.request

URLS = [
    "https://suitesparse-collection-website.herokuapp.com/MM/HB/orani678.tar.gz",
    "https://sparse.tamu.edu/MM/HB/orani678.tar.gz",
]


def fetch(dest_dir: pathlib.Path) -> pathlib.Path:
    dest_dir.mkdir(parents=True, exist_ok=True)
    target = dest_dir / "orani678.mtx"
    if target.exists():
        print(f"already present: {target}")
        return target
    last_err = None
    for url in URLS:
        try:
            print(f"downloading {url} ...")
            with urllib.request.urlopen(url, timeout=60) as resp:
                payload = resp.read()
            break
        except OSError as err:
            print(f"  failed: {err}")
            last_err = err
    else:
        raise SystemExit(f"could not download orani678: {last_err}")
    with tarfile.open(fileobj=io.BytesIO(payload), mode="r:gz") as tar:
        member = next(m for m in tar.getmembers() if m.name.endswith("orani678.mtx"))
        with tar.extractfile(member) as fh:
            target.write_bytes(fh.read())
    print(f"wrote {target} ({target.stat().st_size} bytes)")
    return target


if __name__ == "__main__":
    root = pathlib.Path(__file__).resolve().parent.parent
    dest = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else root / "data"
    fetch(dest)
