from setuptools import setup, find_packages

setup(
    name='kripkeforge',
    version='0.1.0',
    description='Decision procedure and Henkin-style model construction for '
                'first-order modal theories over discrete linear frames.',
    python_requires='>=3.9',
    packages=find_packages(exclude=['tests', 'data']),
    install_requires=[
        'pandas>=1.5.0',
        'lark>=1.1',
        'click>=8.0',
        'jsonschema>=4.0',
        'filelock>=3.0',
    ],
    extras_require={
        'test': ['pytest', 'pytest-mock', 'pyfakefs', 'hypothesis'],
    },
    entry_points={
        'console_scripts': ['kripkeforge=kripkeforge.cli:main'],
    },
)
