__version__ = "0.1.0"

from .spectrum import locate_exceptional, real_eigenvalues, sweep, track
