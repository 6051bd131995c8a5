"""HTTP service exposing the core library."""
