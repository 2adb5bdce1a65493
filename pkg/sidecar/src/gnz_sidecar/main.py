"""Command-line entry: ``gnz-sidecar [--config cfg.json] MANIFEST``.

Exit codes: 0 ok, 1 data error, 2 manifest/config error, 3 training
divergence (non-finite loss).
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, SidecarConfig, load_config
from .data import DataError
from .gnze import GnzeError
from .train import DivergenceError, ManifestError, serve_manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gnz-sidecar",
        description="CNN feature extractor speaking the gnz manifest protocol.",
    )
    parser.add_argument("manifest", help="path to the manifest JSON")
    parser.add_argument("--config", help="sidecar config JSON")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0

    try:
        cfg = load_config(args.config) if args.config else SidecarConfig()
    except (ConfigError, OSError) as e:
        print(f"gnz-sidecar: config error: {e}", file=sys.stderr)
        return 2

    try:
        result = serve_manifest(args.manifest, cfg)
    except ManifestError as e:
        print(f"gnz-sidecar: manifest error: {e}", file=sys.stderr)
        return 2
    except DivergenceError as e:
        print(f"gnz-sidecar: training diverged: {e}", file=sys.stderr)
        return 3
    except (DataError, GnzeError, OSError) as e:
        print(f"gnz-sidecar: data error: {e}", file=sys.stderr)
        return 1

    print(f"gnz-sidecar: wrote {result.features.shape[0]}x{result.features.shape[1]} features", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
