"""Write a self-contained offline demo: fixtures, a benchmark file and a baseline.

    python3 tests/make_demo.py demo
"""

import json
import sys
from pathlib import Path

from scenarios import HOWARD, OPINION, bench_corpus, golden_bundle


def main(out: str) -> None:
    root = Path(out)
    bundle, rows, baseline = bench_corpus()
    golden = golden_bundle()
    # one bundle serves both the single-claim and the benchmark walkthroughs
    for part in ("llm", "search", "pages", "mbfc"):
        getattr(bundle, part).update(getattr(golden, part))
    bundle.save(root / "fixtures")
    (root / "bench.jsonl").write_text("".join(json.dumps(r) + "\n" for r in rows))
    (root / "baseline.json").write_text(json.dumps(baseline, indent=2) + "\n")
    (root / "claims.txt").write_text(f"{HOWARD.text}\n{OPINION.text}\n")
    print(f"demo written to {root}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "demo")
