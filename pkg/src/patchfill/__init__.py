"""Exemplar-based inpainting with exact successive-elimination patch search."""
from .engine import (BilateralParams, FillReport, InpaintParams, UnfillableError,
                     bilateral_filter, global_patch_energy, inpaint, update_confidence,
                     verify_verbatim)
from .front import confidence_term, data_term, extract_front, priority
from .image import (ImageFormatError, Raster, RegionMask, SummedAreaTable, build_sat,
                    clamp_for_sentinel, detect_damaged, load_mask, load_raster, save_raster)
from .search import (MatchResult, NoCandidateError, PatchQuery, PatchSearcher, Window,
                     best_match_bruteforce, best_match_sea, restrict_window, ssd_partial)

__version__ = "0.1.0"
