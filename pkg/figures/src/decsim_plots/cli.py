"""CLI: ``plots <kind> --in <csv...> --out <png>``.

Exits 0 on success, 2 on schema errors (missing columns, unknown kind),
1 on anything else.
"""

from __future__ import annotations

import argparse
import sys

from .render import PLOT_KINDS, PlotJob, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render decsim CSV outputs as figures.")
    parser.add_argument("kind", choices=PLOT_KINDS, help="plot kind")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV file(s)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--manifest", default=None,
                        help="run manifest JSON for provenance (default: "
                             "manifest.json beside the first input, if present)")
    parser.add_argument("--cmap", default="viridis", help="cluster colour map")
    parser.add_argument("--zoom-inset", action="store_true",
                        help="add a zoom inset on the final rounds")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    job = PlotJob(kind=args.kind, inputs=list(args.inputs), output=args.out,
                  manifest=args.manifest, cluster_cmap=args.cmap,
                  zoom_inset=args.zoom_inset)
    try:
        _, out = render(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
