"""
Colour layers from a self-organizing map
========================================

A small SOM groups pixel colours into layers. Damaged pixels are routed
to the layer most common around them, and each is filled only from
exemplars in its own layer.
"""
import numpy as np

from patchfill import fixtures
from patchfill.engine import InpaintParams
from patchfill.image import Raster, RegionMask
from patchfill.layers import assign_layers, inpaint_by_layers, quantization_error, route_damaged, train_som

colours = fixtures.eight_colors(32)
som = train_som(colours, m=4, n=2, epochs=20, seed=0)
print("quantization error", quantization_error(colours.data.reshape(-1, 3), som.weights))
print("weights\n", np.round(som.weights).astype(int))
print("per-epoch error", np.round(som.epoch_errors, 3))

# two textures, two holes, one layer per side
truth = fixtures.two_texture(80, 60)
mask = np.zeros((60, 80), bool)
mask[25:33, 10:18] = True
mask[25:33, 62:70] = True
mask = RegionMask(mask)
damaged = truth.copy_data()
damaged[mask.flags] = 0.0
damaged = Raster(damaged)

som2 = train_som(damaged, mask, 1, 2, epochs=3)
layers = assign_layers(damaged, mask, som2)
parts = route_damaged(layers, mask)
print("damaged pixels per layer", [p.count for p in parts])

out, rep, _ = inpaint_by_layers(damaged, mask, 1, 2, epochs=3, params=InpaintParams(patch_size=7))
same_side = all((s.target[1] < 40) == (s.exemplar[1] < 40) for s in rep.steps)
print("every exemplar came from the target's side:", same_side, "fallbacks:", len(rep.fallbacks))
