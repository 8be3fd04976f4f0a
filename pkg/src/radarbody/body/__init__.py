from .kinematics import BodyOutput, BodyParams, WorldTransforms, forward_kinematics, reconstruct, skin_vertices
from .rotation import (axis_angle_matrix, geodesic_distance, identity_rot6d, matrix_to_rot6d,
                       rot6d_to_matrix)
from .template import BodyTemplate, make_template, template_from_json, template_to_json

__all__ = [
    "BodyOutput", "BodyParams", "BodyTemplate", "WorldTransforms", "axis_angle_matrix",
    "forward_kinematics", "geodesic_distance", "identity_rot6d", "make_template",
    "matrix_to_rot6d", "reconstruct", "rot6d_to_matrix", "skin_vertices",
    "template_from_json", "template_to_json",
]
