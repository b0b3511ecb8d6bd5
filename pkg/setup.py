#!/usr/bin/env python3

from setuptools import find_packages, setup

INSTALL_REQUIRES = ['numpy', 'numba', 'pandas', 'xarray', 'scipy',
                    'scikit-learn', 'joblib', 'sympy', 'mpmath']
TESTS_REQUIRE = ['pytest >= 2.7.1', 'pytest-cov']

setup(
    name='decoherence_lab',
    version='0.1.0.dev0',
    license='MIT',
    description=('Simulate decoherence of open quantum systems.'),
    packages=find_packages(exclude=['tests']),
    install_requires=INSTALL_REQUIRES,
    tests_require=TESTS_REQUIRE,
    entry_points={
        'console_scripts': ['decoherence-lab = decoherence_lab.cli:main'],
    },
)
