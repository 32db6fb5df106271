"""Write the METABRIC survival table (1904 rows, 9 features) as CSV.

The table ships inside the ``survival_datasets`` wheel as a feather file.  The
wheel is fetched with pip into a temporary directory, so nothing is installed.
Needs pandas with pyarrow for the feather read; the ennsurv package itself
does not.

    python scripts/export_metabric.py data/metabric.csv
"""

import argparse
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import pandas as pd

WHEEL = "survival_datasets==0.1.5"
MEMBER = "survdata/metabric.feather"


def fetch(dest: Path) -> pd.DataFrame:
    subprocess.run([sys.executable, "-m", "pip", "download", WHEEL, "--no-deps", "-q", "-d", str(dest)],
                   check=True)
    wheel = next(dest.glob("survival_datasets-*.whl"))
    with zipfile.ZipFile(wheel) as z:
        return pd.read_feather(io.BytesIO(z.read(MEMBER)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("output", nargs="?", default="data/metabric.csv")
    args = ap.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        df = fetch(Path(tmp))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out, index=False)
    print(f"{out}: {len(df)} rows, censoring rate {1 - df['event'].mean():.4f}")


if __name__ == "__main__":
    main()
