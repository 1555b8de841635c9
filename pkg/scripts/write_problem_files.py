"""Write problems/<name>.json for every catalog instance."""

import argparse
from pathlib import Path

from fejer import problems
from fejer.config import save_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dir", default=str(Path(__file__).resolve().parent.parent / "problems"))
    args = ap.parse_args()
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in problems.CATALOG:
        save_problem(problems.get_instance(name), out / f"{name}.json")
        print(out / f"{name}.json")


if __name__ == "__main__":
    main()
