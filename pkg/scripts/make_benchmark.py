#!/usr/bin/env python3
"""Generate the synthetic benchmark fixtures used by the experiment scripts.

Writes three sequence pairs under the output directory:
  noiseless/   detections identical to ground truth (oracle sanity fixture)
  benchmark/   the corrupted calibrated benchmark (jitter, misses, false poses)
  retention/   a large clean set for keypoint-retention statistics
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from topdown import synth
from topdown.model import save_predictions


def write_pair(out_dir: Path, out: synth.SynthOutput, spec: synth.SynthSpec) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "gt.json").write_text(save_predictions(out.gt))
    (out_dir / "det.json").write_text(save_predictions(out.det))
    (out_dir / "provenance.json").write_text(out.provenance_to_json())
    (out_dir / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/fixtures", help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    root = Path(args.out)

    specs = {
        "noiseless": synth.noiseless_spec(n_persons=3, n_frames=30, seed=args.seed),
        "benchmark": synth.calibrated_benchmark_spec(seed=args.seed),
        "retention": synth.calibrated_benchmark_spec(
            n_persons=5, n_frames=800, seed=args.seed + 4, fp_rate=0.0, p_miss=0.0
        ),
    }
    for name, spec in specs.items():
        write_pair(root / name, synth.generate(spec), spec)
        print(f"wrote {root / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
