"""Desk-scale simulator of a hands-free assistive pick-and-place pipeline.

Synthetic RGB-D perception, grasp-rectangle manipulation planning for a
7-DOF arm, a menu-driven intent state machine driven by discrete commands,
and an experiment harness with seeded trials and metric reports.
"""

__version__ = "0.1.0"
