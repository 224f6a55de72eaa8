"""Exception hierarchy shared across the package."""


class SptError(Exception):
    """Base class for all package-specific errors."""


# --- simplex / path validation ---

class NegativeWeight(SptError):
    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"weight[{index}] = {value!r} is negative")


class SumNotOne(SptError):
    def __init__(self, total):
        self.total = total
        super().__init__(f"weights sum to {total!r}, expected 1")


class NotOnHyperplane(SptError):
    def __init__(self, total):
        self.total = total
        super().__init__(f"coordinates sum to {total!r}, expected 1")


class NonpositiveWeight(SptError):
    pass


# --- generating functions ---

class BoundaryEvaluation(SptError):
    """Gradient/Hessian requested at a boundary point where it is undefined."""


class AtNavel(SptError):
    """The cyclic gradient-difference vector vanishes (interior maximizer)."""


class NonpositiveL(SptError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"diffusion normalizer L = {value!r} is not positive")


# --- covariation / linear algebra ---

class NotSymmetric(SptError):
    pass


# --- strategies ---

class GridMismatch(SptError):
    pass


class GeneratorNearZero(SptError):
    """Multiplicative generation needs G(mu) bounded away from zero."""


class Mu1NearZero(SptError):
    pass


# --- models ---

class SpecViolation(SptError):
    """Drift/diffusion fields violate the zero-row-sum structure."""


class AtNode(SptError):
    """Model requires a start away from the barycenter (1/3, 1/3, 1/3)."""


class UnknownModel(SptError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown model id {name!r}")


# --- ingest / config ---

class ParseError(SptError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class NonpositiveCap(SptError):
    def __init__(self, row, col):
        self.row = row
        self.col = col
        super().__init__(f"nonpositive capitalization at row {row}, column {col}")


class NonuniformGrid(SptError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"non-uniform time spacing first detected at row {row}")


class ConfigError(SptError):
    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"config error at key {key!r}")
