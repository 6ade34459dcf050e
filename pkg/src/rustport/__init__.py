"""rustport: fragment-by-fragment Go-to-Rust project translation with
feature-mapping rule enforcement, serialization-based type-compatibility
checks, and snapshot-driven I/O equivalence validation."""

__version__ = "0.1.0"
