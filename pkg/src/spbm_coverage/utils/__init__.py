"""Report emission helpers."""
