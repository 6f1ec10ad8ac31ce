"""
Error hierarchy shared by every VortexLab app.

Each error carries the exit code the management commands return for it.
"""


class VortexLabError(Exception):
    """Base class for all domain errors"""
    exit_code = 1

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


# ============================================
# CONFIGURATION AND ARGUMENT ERRORS
# ============================================

class ConfigError(VortexLabError):
    """Experiment configuration could not be parsed or validated"""
    exit_code = 2


class InvalidArgumentError(VortexLabError, ValueError):
    """A constructor or operation received an argument outside its domain"""
    exit_code = 3


class InvalidConfigurationError(InvalidArgumentError):
    """Coincident centers, vortex points on centers, or overlapping balls"""


# ============================================
# DOMAIN ERRORS
# ============================================

class SingularPointError(VortexLabError):
    """Evaluation requested at a logarithmic singularity"""
    exit_code = 3


class OutOfBranchError(VortexLabError):
    """Value outside the branch (-inf, 0] of the Higgs substitution"""
    exit_code = 3

    def __init__(self, message, worst_value=None, worst_index=None):
        super().__init__(message, worst_value=worst_value, worst_index=worst_index)
        self.worst_value = worst_value
        self.worst_index = worst_index


class IterationFailureError(VortexLabError):
    """Scalar root finding did not converge"""
    exit_code = 3


class NonzeroMeanError(VortexLabError):
    """Right-hand side of the periodic Poisson problem is not mean zero"""
    exit_code = 3


class AnsatzInfeasibleError(VortexLabError):
    """Negative discriminant in the matching constant c(w)"""
    exit_code = 3


class ProjectionDegenerateError(VortexLabError):
    """Gram matrix of the approximate kernels is singular"""
    exit_code = 3


# ============================================
# LIMIT AND SOLVER FAILURES
# ============================================

class LimitUnstableError(VortexLabError):
    """Extrapolation in r did not settle"""
    exit_code = 4

    def __init__(self, message, table=None):
        super().__init__(message, table=table)
        self.table = table or []


class ReducedSystemInfeasibleError(VortexLabError):
    """No root of the reduced equations inside the mu window"""
    exit_code = 5


class NonConvergenceError(VortexLabError):
    """Newton iteration exhausted its budget or its line search"""
    exit_code = 6

    def __init__(self, message, trace=None):
        super().__init__(message, trace=trace)
        self.trace = list(trace or [])


class LinearSolveFailureError(NonConvergenceError):
    """Krylov iteration stagnated on the Jacobian system"""


class SearchFailureError(NonConvergenceError):
    """Critical point search left the admissible configuration set"""


class NoSolutionDetectedError(NonConvergenceError):
    """Monotone iterates diverged, eps is likely above the critical coupling"""


class DegenerateCriticalPointWarning(UserWarning):
    """Critical point found but its Hessian is numerically singular"""
