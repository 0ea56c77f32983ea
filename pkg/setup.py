"""Build script: compiles the optional motion kernel extension.

The package works without the extension (a pure-Python kernel is selected at
import time), so a failed compile must not fail the install.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "twinline.factory._motion",
                ["src/twinline/factory/_motion.pyx"],
                optional=True,
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
