"""The deterministic synthetic relighting-pair generator.

Renders one heightfield under the eight compass light directions and the
extreme color temperatures, writing every frame as a PNG. The same seed
always reproduces the same bytes.
"""

from pathlib import Path

import numpy as np

from wavelight import data
from wavelight.data import Azimuth, IlluminationSetting

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

seed, size = 4, 128
for az in Azimuth:
    pair = data.synth_relight_pair(seed, size,
                                   IlluminationSetting(az, 6500),
                                   IlluminationSetting(az, 6500))
    data.save_png(OUT / f"light_{az.value}.png", pair.input_image)
print(f"eight light directions -> {OUT}/light_*.png")

for kelvin in (2500, 4500, 6500):
    pair = data.synth_relight_pair(seed, size,
                                   IlluminationSetting(Azimuth.NW, kelvin),
                                   IlluminationSetting(Azimuth.NW, kelvin))
    data.save_png(OUT / f"temp_{kelvin}K.png", pair.input_image)
    print(f"{kelvin}K tint multipliers: {np.round(data.color_tint(kelvin), 3)}")

a = data.synth_relight_pair(seed, size, data.DEFAULT_FROM, data.DEFAULT_TO)
b = data.synth_relight_pair(seed, size, data.DEFAULT_FROM, data.DEFAULT_TO)
print("same seed, same bytes:", np.array_equal(a.input_image.data, b.input_image.data))

# a training-style pair: north 6500K in, east 4500K out, same geometry
data.save_png(OUT / "pair_input.png", a.input_image)
data.save_png(OUT / "pair_target.png", a.target_image)
print(f"training pair (N/6500K -> E/4500K) -> {OUT}/pair_*.png")
