"""
Services for the rigidflow toolkit.
One module per concern; the CLI commands call into these.
"""
