"""roomsim: deterministic simulation kernel for mobile-manipulation robots
in interactive indoor box-world scenes."""

__version__ = "0.1.0"
