"""
Loading images and finding the damaged region
==============================================

Damaged pixels can be painted in-band with a marker intensity (255 by
default) or supplied as a separate mask image. This walks through both.
"""
import sys
import tempfile
from pathlib import Path

import numpy as np

from patchfill import fixtures
from patchfill.image import Raster, build_sat, clamp_for_sentinel, detect_damaged, load_mask, load_raster, \
    save_mask, save_raster

out = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp())
out.mkdir(parents=True, exist_ok=True)

# a small colour image; the fixture never uses the value 255
img = fixtures.two_texture(64, 48)
print("shape", img.shape, "channels", img.channels, "max", img.data.max())

# paint a rectangle with the sentinel and write it as PPM
data = img.copy_data()
data[20:28, 10:30] = 255.0
save_raster(Raster(data), out / "damaged.ppm")

# reading it back and detecting the marker gives the target region
back = load_raster(out / "damaged.ppm")
mask = detect_damaged(back)
print("damaged pixels", mask.count)

# an image that genuinely contains 255 would be misread, so clamp it first
bright = Raster(np.full((4, 4), 255.0))
print("before clamp", detect_damaged(bright).count,
      "after clamp", detect_damaged(clamp_for_sentinel(bright)).count)

# the mask can also live in its own file (nonzero = fill)
save_mask(mask, out / "mask.png")
print("mask round trip equal:", np.array_equal(load_mask(out / "mask.png").flags, mask.flags))

# summed-area tables give any rectangle sum in constant time
sat = build_sat(img)
print("rect sum", sat.rect_sum(0, 0, 10, 10), "direct", img.data[:10, :10].sum(axis=(0, 1)))
print("files written to", out)
