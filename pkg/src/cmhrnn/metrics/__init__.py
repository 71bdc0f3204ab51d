"""Analytical melody metrics."""

from .bars import UndefinedMetricError, successful_bar_ratio
from .cosiatec import (TEC, compression_ratio, cosiatec, encoding_cost, melody_to_point_set, point_set,
                       reconstruct, siatec, translate)
from .report import COLUMNS, EvaluationReport, PieceRow, evaluate_corpus, evaluate_piece
from .tension import (HEIGHT, RADIUS, SpiralPoint, TensionProfile, center_of_effect, chord_point,
                      cloud_diameter, cloud_momentum, cloud_points, key_point, line_of_fifths, pitch_point,
                      spiral_position, tensile_strain, tension_profile)
