"""Figure scripts for the experiment CLI's CSV/JSON artifacts.

Each module renders one figure kind and exposes a console entry point with
the common flags --input, --output, --title.  The scripts consume files
only; they never invoke the inference engine.
"""

__version__ = "0.1.0"
