"""Human body reconstruction from mmWave radar point clouds.

Subpackages:
    autodiff  reverse-mode differentiation engine, Adam, checkpoint container
    body      SMPL-style parametric body (template, kinematics, rotations)
    sim       synthetic radar data source and dataset file format
    net       point backbone, bi-GRU, attention fusion, losses, window crop
    harness   training loop, metrics, evaluation, checkpointing
    cli       command-line entry point (simulate | train | eval | inspect)
"""

__version__ = "0.1.0"
