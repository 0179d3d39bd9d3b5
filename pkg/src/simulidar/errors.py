"""Exception hierarchy shared across the package."""


class SimulidarError(Exception):
    """Base class for package errors."""


class DataFormatError(SimulidarError):
    """Malformed or inconsistent input data (files, arrays, configs)."""


class GeometryError(SimulidarError):
    """Invalid or degenerate geometric input."""


class ProtocolError(SimulidarError):
    """Fatal denoiser wire-protocol violation (version/shape mismatch)."""


class TransportError(ProtocolError):
    """Lost or broken connection to a remote denoiser; safe to retry."""
