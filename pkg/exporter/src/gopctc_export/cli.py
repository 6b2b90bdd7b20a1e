"""Command line for the emission exporter."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gopctc.errors import GopCtcError

from .errors import ExportError
from .export import ExportJob, export


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export_emissions",
        description="Run a pretrained CTC letter recognizer over a directory of "
        "WAV files and write GOPE emission files, a matching vocab file, and a "
        "manifest skeleton.",
    )
    parser.add_argument("--model", required=True,
                        help="model hub id or local model directory")
    parser.add_argument("--audio-dir", required=True)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    audio_dir = Path(args.audio_dir)
    if not audio_dir.is_dir():
        print(f"export_emissions: error: {audio_dir} is not a directory", file=sys.stderr)
        return 2
    utterances = tuple(
        (path.stem, path) for path in sorted(audio_dir.glob("*.wav"))
    )
    if not utterances:
        print(f"export_emissions: error: no .wav files in {audio_dir}", file=sys.stderr)
        return 2
    job = ExportJob(utterances=utterances, model_id=args.model, out_dir=Path(args.out_dir))
    progress = None
    if not args.quiet:
        progress = lambda utt_id: print(f"exported {utt_id}", file=sys.stderr)
    try:
        rows = export(job, progress=progress)
    except (ExportError, GopCtcError, OSError) as exc:
        print(f"export_emissions: error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {len(rows)} emission files to {args.out_dir}", file=sys.stderr)
    return 0


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
