"""
Successive elimination versus the exhaustive scan
=================================================

Both searches return the same best exemplar. The elimination search
skips most candidates because a cheap lower bound on their SSD already
exceeds the best distance found so far.
"""
import time

import numpy as np

from patchfill import fixtures
from patchfill.engine import InpaintParams, inpaint
from patchfill.image import Raster
from patchfill.search import PatchQuery, best_match_bruteforce, best_match_sea

img = fixtures.two_texture(160, 120)
mask = fixtures.blob_mask(img.shape, 0.10, seed=1)

# a single query on the fill front
known = ~mask.flags
front = np.argwhere(mask.flags & np.roll(known, 1, axis=1))
q = PatchQuery.from_known(tuple(front[0]), 9, known)
a = best_match_bruteforce(q, img, mask)
b = best_match_sea(q, img, mask)
print("brute", a.center, a.ssd, "examined", a.candidates_examined)
print("sea  ", b.center, b.ssd, "examined", b.candidates_examined, "pruned", b.candidates_pruned)

# whole fills with each strategy
damaged = img.copy_data()
damaged[mask.flags] = 0.0
timings = {}
outputs = {}
for use_sea in (False, True):
    t0 = time.perf_counter()
    out, rep = inpaint(Raster(damaged), mask, InpaintParams(patch_size=9, use_sea=use_sea))
    timings[use_sea] = time.perf_counter() - t0
    outputs[use_sea] = out.data.tobytes()
    print(f"use_sea={use_sea}: {timings[use_sea]:.1f}s examined={rep.examined} pruned={rep.pruned}")
print("identical output:", outputs[False] == outputs[True])
print(f"time ratio sea/brute: {timings[True] / timings[False]:.2f}")
