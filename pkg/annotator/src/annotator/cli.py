"""CLI: annotate --products P --reviews R --out A.jsonl"""

import argparse
import logging
import sys

from .pipeline import AnnotationJob, annotate


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="annotate",
        description="Emit coreference/core-word annotations for a review corpus",
    )
    parser.add_argument("--products", required=True)
    parser.add_argument("--reviews", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    job = AnnotationJob(
        products_path=args.products,
        reviews_path=args.reviews,
        output_path=args.out,
        batch_size=args.batch_size,
    )
    try:
        records = annotate(job)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {len(records)} annotation records to {args.out}")
    if job.skipped:
        print(f"skipped {len(job.skipped)} reviews (see manifest)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
