"""Grading rules for the three glenohumeral conditions.

Osteophyte size follows the 3 mm / 7 mm protrusion-height cut-offs
(Samilson-Prieto style), with ties at a threshold assigned to the middle
grade since the intermediate band is inclusive.  Joint-space and alignment
grades are millimeter conventions used by the synthetic cohort; the clinical
systems they mirror are qualitative, so the thresholds are configurable
constants rather than measured truths.
"""

from __future__ import annotations

from .errors import InvalidDistance

OS_SMALL_MM = 3.0
OS_LARGE_MM = 7.0

JS_PHYSIOLOGICAL_MM = 2.0   # gap above this: grade 0
JS_DETECTABLE_MM = 0.5      # gap below this: grade 2 (non-detectable)

HSA_ECCENTRIC_FRACTION = 0.25  # offset beyond this fraction of glenoid radius


def stage_os(d_max: float) -> int:
    """Osteophyte grade from the maximum morphologic-to-cleared surface distance."""
    if d_max < 0:
        raise InvalidDistance(f"negative surface distance {d_max}")
    if d_max < OS_SMALL_MM:
        return 0
    if d_max <= OS_LARGE_MM:
        return 1
    return 2


def stage_js(gap_mm: float) -> int:
    """Joint-space grade: physiological (0), narrowed (1), non-detectable (2)."""
    if gap_mm < 0:
        raise InvalidDistance(f"negative joint gap {gap_mm}")
    if gap_mm > JS_PHYSIOLOGICAL_MM:
        return 0
    if gap_mm >= JS_DETECTABLE_MM:
        return 1
    return 2


def stage_hsa(offset_mm: float, glenoid_radius_mm: float) -> int:
    """Alignment grade: concentric (0) vs eccentric (1), scale-free in the
    glenoid radius."""
    if offset_mm < 0 or glenoid_radius_mm <= 0:
        raise InvalidDistance("offset must be >= 0 and glenoid radius > 0")
    return int(offset_mm > HSA_ECCENTRIC_FRACTION * glenoid_radius_mm)
