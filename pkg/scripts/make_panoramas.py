#!/usr/bin/env python3
"""Regenerate the bundled test panoramas (deterministic; safe to re-run)."""

import argparse
from pathlib import Path

from omnisr.imgio import write_image
from omnisr.testimages import ASSET_DIR, PANORAMA_NAMES, make_panorama


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--height", type=int, default=1024)
    parser.add_argument("--width", type=int, default=2048)
    parser.add_argument("--out-dir", type=Path, default=ASSET_DIR)
    args = parser.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for name in PANORAMA_NAMES:
        path = args.out_dir / f"{name}.png"
        write_image(path, make_panorama(name, args.height, args.width))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
