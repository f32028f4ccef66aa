"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration value or unusable command-line combination."""


class ArtifactError(Exception):
    """Unreadable, corrupted, or incompatible on-disk artifact (subject file, manifest, checkpoint)."""
