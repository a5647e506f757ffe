from setuptools import setup

setup(
    name='QuantumPortfolio',
    use_scm_version=True,
    setup_requires=['setuptools_scm'],
    packages=['quantum_portfolio', 'quantum_portfolio.tests'],
    license='GPL',
    description='Portfolio optimization as Ising ground state search with QAOA and imaginary time evolution on a '
                'noisy statevector simulator',
    classifiers=[
        'Development Status :: 4 - Beta',
    ],
    keywords='portfolio optimization qaoa imaginary time evolution ising qubo quantum simulation',
    python_requires='>=3.6',
    install_requires=[
        "numpy",
        "scipy",
        "sortedcontainers",
    ],
    extras_require={
        'test': ["pytest"],
    },
    entry_points={
        'console_scripts': ['quantum-portfolio=quantum_portfolio.cli:main'],
    },
)
