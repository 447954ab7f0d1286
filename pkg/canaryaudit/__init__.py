"""
canaryaudit - black-box differential privacy auditing with many i.i.d. canaries
"""

__version__ = "0.1.0"
