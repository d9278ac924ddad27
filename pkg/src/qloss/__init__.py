"""qloss: loss analysis for superconducting CPW resonators and transmon qubits.

Submodules
----------
types      validated domain containers (traces, fit results, qubit records)
units      boundary unit conversions (dBm/GHz/us/nm <-> SI)
dataset    qubit measurement table loading (bundled reference set included)
resfit     notch-type S21 circle fitting with diameter correction
tls        photon-number calibration and power-dependent TLS loss fitting
qubit      T1 fits, Purcell decay, screening, quality-factor budgets
fem        2D electrostatic participation-ratio solver for CPW cross-sections
cli        batch command-line front end
"""

__version__ = "0.1.0"
