"""Exception types shared across the package.

Every rejection carries enough context (row, field, key) to audit why a
record or request was refused; loaders never silently coerce bad values.
"""

from __future__ import annotations


class VulnscapeError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(VulnscapeError):
    """Bad input data or configuration (CLI exit code 1)."""

    code = "validation_error"


# --- ingestion -------------------------------------------------------------

class MissingColumn(ValidationError):
    code = "missing_column"

    def __init__(self, columns, path=None):
        self.columns = list(columns)
        self.path = path
        super().__init__(f"missing column(s) {self.columns}" + (f" in {path}" if path else ""))


class RangeViolation(ValidationError):
    code = "range_violation"

    def __init__(self, field: str, message: str, row: int | None = None):
        self.field = field
        self.message = message
        self.row = row
        where = f" (row {row})" if row is not None else ""
        super().__init__(f"{field}: {message}{where}")


class BaselineWaveError(RangeViolation):
    """Wave 1 defines the vulnerability cutoff and is not a data point."""

    code = "baseline_wave"

    def __init__(self, row: int | None = None):
        super().__init__("wave", "wave 1 is the baseline and carries no usable data", row)


class DuplicateKey(ValidationError):
    code = "duplicate_key"

    def __init__(self, neighborhood: str, wave: int, row: int | None = None):
        self.neighborhood = neighborhood
        self.wave = wave
        self.row = row
        super().__init__(f"duplicate record for ({neighborhood}, wave {wave})")


class UnknownVariable(ValidationError):
    code = "unknown_variable"

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column {column!r} is not in the variable catalog")


class KindMismatch(ValidationError):
    code = "kind_mismatch"

    def __init__(self, var_id: str, value: str, row: int | None = None):
        self.var_id = var_id
        self.value = value
        self.row = row
        super().__init__(f"non-numeric cell {value!r} for numeric variable {var_id!r}"
                         + (f" (row {row})" if row is not None else ""))


class BadDate(ValidationError):
    code = "bad_date"

    def __init__(self, field: str, value: str, row: int | None = None):
        self.field = field
        self.value = value
        self.row = row
        super().__init__(f"{field}: cannot parse date {value!r}"
                         + (f" (row {row})" if row is not None else ""))


class NegativeAge(ValidationError):
    code = "negative_age"

    def __init__(self, client_id: str, row: int | None = None):
        self.client_id = client_id
        self.row = row
        super().__init__(f"registration precedes birth date for client {client_id}"
                         + (f" (row {row})" if row is not None else ""))


# --- geometry ---------------------------------------------------------------

class DegenerateGeometry(ValidationError):
    code = "degenerate_geometry"


class OverlapAmbiguity(VulnscapeError):
    code = "overlap_ambiguity"

    def __init__(self, da_id: str, neighborhoods):
        self.da_id = da_id
        self.neighborhoods = sorted(neighborhoods)
        super().__init__(f"centroid of DA {da_id} lies strictly inside {self.neighborhoods}")


class ZeroPopulationWeight(VulnscapeError):
    code = "zero_population_weight"

    def __init__(self, neighborhood: str, var_id: str | None = None):
        self.neighborhood = neighborhood
        self.var_id = var_id
        super().__init__(f"all population weights are zero for neighborhood {neighborhood}"
                         + (f" (variable {var_id})" if var_id else ""))


# --- embedding / clustering --------------------------------------------------

class MissingWave(ValidationError):
    code = "missing_wave"

    def __init__(self, neighborhood: str, wave: int):
        self.neighborhood = neighborhood
        self.wave = wave
        super().__init__(f"neighborhood {neighborhood} has no record for wave {wave}")


class PerplexityTooLarge(ValidationError):
    code = "perplexity_too_large"

    def __init__(self, perplexity: float, n: int):
        super().__init__(f"perplexity {perplexity} exceeds (n-1)/3 = {(n - 1) / 3:.3f} for n={n}")


class NonFiniteGradient(VulnscapeError):
    code = "non_finite_gradient"

    def __init__(self, iteration: int, detail: str):
        self.iteration = iteration
        super().__init__(f"non-finite gradient at iteration {iteration}: {detail}")


class TooFewPoints(ValidationError):
    code = "too_few_points"


class KExceedsN(ValidationError):
    code = "invalid_k"

    def __init__(self, k: int, n: int):
        super().__init__(f"k={k} is outside [1, n={n}]")


class MissingScaleValue(ValidationError):
    code = "missing_scale_value"

    def __init__(self, key):
        self.key = key
        super().__init__(f"no EDI value on the ranking scale for point {key!r}")


class KeyMismatch(ValidationError):
    code = "key_mismatch"


class DegenerateCloud(ValidationError):
    code = "degenerate_cloud"


# --- statistics ---------------------------------------------------------------

class DegenerateInput(ValidationError):
    code = "degenerate_input"


class AllValuesTied(ValidationError):
    code = "all_values_tied"


class SampleTooSmall(ValidationError):
    code = "sample_too_small"

    def __init__(self, n: int, minimum: int):
        super().__init__(f"sample of {n} is below the minimum of {minimum}")


class ConstantInput(ValidationError):
    code = "constant_input"


class LabelWithoutProfile(ValidationError):
    code = "label_without_profile"

    def __init__(self, neighborhood: str):
        self.neighborhood = neighborhood
        super().__init__(f"labeled neighborhood {neighborhood} has no census profile")


# --- retention / pipeline / service -------------------------------------------

class EmptyInput(ValidationError):
    code = "empty_input"


class MissingPopulation(ValidationError):
    code = "missing_population"

    def __init__(self, neighborhood: str):
        self.neighborhood = neighborhood
        super().__init__(f"no child population known for neighborhood {neighborhood}")


class NoRunAvailable(VulnscapeError):
    code = "no_run_available"
