

__all__ = [
    "cavity",
    "counting",
    "errors",
    "jones",
    "pair_source",
    "report",
    "run",
    "scenario",
    "settings",
    "spectral",
    "stages",
    "thermal_lock",
    "tomography",
]
