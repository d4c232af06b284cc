"""Control data and smooth weak deformation retractions for stratified sets."""

__version__ = "0.1.0"
