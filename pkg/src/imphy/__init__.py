"""Link-level simulation of index modulation: SM family, OFDM-IM family and MIMO-OFDM-IM."""

__version__ = "0.1.0"
