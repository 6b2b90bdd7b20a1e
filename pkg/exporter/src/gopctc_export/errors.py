class ExportError(Exception):
    """Exporter failure: model loading, audio decoding, or inventory issues."""
