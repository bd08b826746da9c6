"""Exception types shared across the enhancement pipeline."""


class ConvbeamError(Exception):
    """Base class for all library-specific errors."""


class _ContextError(ConvbeamError):
    """Error carrying optional pipeline context (stage, frequency bin)."""

    def __init__(self, message, *, batch_index=None, frequency_bin=None,
                 stage=None):
        self.message = message
        self.batch_index = batch_index
        self.frequency_bin = frequency_bin
        self.stage = stage
        parts = [message]
        if stage is not None:
            parts.append(f"stage={stage}")
        if frequency_bin is not None:
            parts.append(f"frequency_bin={frequency_bin}")
        elif batch_index is not None:
            parts.append(f"batch_index={batch_index}")
        super().__init__(", ".join(parts))

    def with_context(self, *, frequency_bin=None, stage=None):
        """Same error re-wrapped with pipeline context attached."""
        return type(self)(
            self.message,
            frequency_bin=(frequency_bin if frequency_bin is not None
                           else self.frequency_bin),
            stage=stage if stage is not None else self.stage,
        )


class SingularMatrixError(_ContextError):
    """Pivoted elimination on the real embedding found no usable pivot.

    ``batch_index`` identifies the failing matrix within a stacked call;
    ``frequency_bin`` and ``stage`` are attached when the error surfaces
    from the enhancement pipeline.
    """


class DegenerateSignalError(_ContextError):
    """Signal statistics are too degenerate to continue.

    Raised for zero power-iteration iterates, all-zero mask weight sums,
    near-zero filter traces / denominators and zero metric references.
    """


class MaskFileError(ConvbeamError):
    """Mask file is truncated, malformed, or carries out-of-range values."""


class ConfigError(ConvbeamError):
    """Configuration file, scene manifest, or environment override is invalid."""
