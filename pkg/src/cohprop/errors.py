"""Exception types. Every numerical failure carries a ``tag`` naming its origin."""


class CohPropError(Exception):
    """Base class; ``tag`` is ``<module>.<kind>`` and ``details`` holds diagnostics."""

    tag = "cohprop.error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ConvergenceError(CohPropError):
    tag = "convergence"

    def __init__(self, message, tag=None, **details):
        super().__init__(message, **details)
        if tag is not None:
            self.tag = tag


class DivergedTrajectoryError(CohPropError):
    tag = "classical_dynamics.diverged"


class CausticError(CohPropError):
    tag = "caustic"

    def __init__(self, message, tag=None, **details):
        super().__init__(message, **details)
        if tag is not None:
            self.tag = tag


class RiccatiBlowupError(CohPropError):
    tag = "classical_dynamics.riccati_blowup"


class ZeroPivotError(CohPropError):
    tag = "discrete_path_integral.zero_pivot"


class IdentityViolation(CohPropError):
    tag = "discrete_path_integral.identity_violation"


class AsymptoticRangeError(CohPropError):
    """Spin multipole rescaling factor is not positive: j too small for the asymptotic form."""

    tag = "spin_symbols.asymptotic_range"


class ConfigError(CohPropError):
    tag = "cli.config"
