"""Command line for batch figure rendering: ``sidesense-plots render --spec fig.json``."""

from __future__ import annotations

import argparse
import json
import sys

from .figures import ContractError, FigureSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sidesense-plots")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a spec file")
    p.add_argument("--spec", required=True, help="figure spec JSON")

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        spec = FigureSpec.from_file(args.spec)
        info = render(spec)
    except (ContractError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"spec error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(info))
    return 0


if __name__ == "__main__":
    sys.exit(main())
