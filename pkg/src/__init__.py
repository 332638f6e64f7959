"""
dqpt-lab: dynamical quantum phase transitions in the alternating-field XY chain
with Dzyaloshinskii-Moriya interaction.
"""

__version__ = "0.3.0"
