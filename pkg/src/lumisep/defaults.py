"""Bundled camera response, sample spectra databases, and derived bases.

The shipped response is a generated smooth trichromatic curve set and the
databases are generated samples; all are user-replaceable through the CLI
flags and the CSV readers in `spectral`.
"""

from functools import lru_cache
from importlib import resources

from . import spectral

_DATA = resources.files("lumisep") / "data"


def data_path(*parts):
    return _DATA.joinpath(*parts)


@lru_cache(maxsize=1)
def default_response() -> spectral.CameraResponse:
    return spectral.read_response_csv(data_path("camera_response.csv"))


@lru_cache(maxsize=1)
def default_reflectance_database():
    return tuple(spectral.read_database(data_path("reflectance")))


@lru_cache(maxsize=1)
def default_illuminant_database():
    return tuple(spectral.read_database(data_path("illuminants")))


@lru_cache(maxsize=1)
def default_bases():
    """(reflectance basis, illumination basis) fit to the bundled data."""
    response = default_response()
    refl = spectral.weighted_pca(
        default_reflectance_database(), response, spectral.REFLECTANCE
    )
    illum = spectral.weighted_pca(
        default_illuminant_database(), response, spectral.ILLUMINATION
    )
    return refl, illum
