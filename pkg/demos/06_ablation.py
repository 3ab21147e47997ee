"""Head-to-head ablations under one seed and budget.

Compares the wavelet resamplers against trainable strided convolutions,
and 2/3/4 decomposition depths, all at desk scale. Nothing here claims
one variant beats another; the point is the harness itself.
"""

from pathlib import Path

from wavelight.cli import main

OUT = Path(__file__).parent / "out" / "ablation"

print("domain ablation (wavelet resamplers vs strided convolutions):")
main(["ablate", "--which", "domain", "--synthetic", "6", "--steps", "40",
      "--seed", "0", "--out", str(OUT / "domain")])
print((OUT / "domain" / "ablation.csv").read_text())

print("decomposition-depth ablation (2 / 3 / 4 levels):")
main(["ablate", "--which", "levels", "--synthetic", "6", "--steps", "40",
      "--seed", "0", "--out", str(OUT / "levels")])
print((OUT / "levels" / "ablation.csv").read_text())

print(f"per-variant training logs in {OUT}")
