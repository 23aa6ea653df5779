"""Diffuse/specular separation from four polarizer-angle captures."""
from .chroma import ChromaticityImage, PixelClassMap, chromaticity, classify_pixels
from .cluster import ClusterSet, build_clusters
from .imagestack import (CANONICAL_ANGLES, PolarizedStack, StackError, load_mosaic, load_stack,
                         read_image, save_image, split_mosaic)
from .metrics import MetricsReport, color_accuracy, evaluate, hue_sd, psnr, ssim
from .optimizer import SeparationParams, SeparationResult, separate
from .rpca import NumericError, pgm_apply, rpca_separate, svt
from .synth import SynthSpec, render_scene, standard_scenes
from .trs import RawComponents, TRSMaps, degree_of_polarization, fit_trs, raw_components

__version__ = "0.1.0"
