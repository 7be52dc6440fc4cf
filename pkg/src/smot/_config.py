import os

# construction merge tolerance for atom positions
MERGE_TOL = 1e-12
# weights at or below this are treated as numerical dust and dropped
DUST = 1e-14


def default_tol():
    """Comparison tolerance for order predicates and constraint residuals.

    Overridable through the ``SMOT_TOL`` environment variable.
    """
    raw = os.environ.get("SMOT_TOL")
    if raw is None:
        return 1e-9
    value = float(raw)
    if not value > 0:
        raise ValueError("SMOT_TOL must be a positive number")
    return value


def resolve_tol(tol):
    return default_tol() if tol is None else float(tol)
