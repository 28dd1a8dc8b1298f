"""shipbow: ship classification from dispersed keypoints and a visual-word codebook."""
__version__ = "0.1.0"
