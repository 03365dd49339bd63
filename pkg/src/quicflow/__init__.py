"""Classification of encrypted flows from packet sizes and timings, with
channel emulation, information-theoretic feature ranking and soft-QoS
conformance checking."""

__version__ = "0.1.0"
