"""
COCO 17-keypoint ordering.
"""

KEYPOINT_NAMES = (
    'nose',
    'left_eye', 'right_eye',
    'left_ear', 'right_ear',
    'left_shoulder', 'right_shoulder',
    'left_elbow', 'right_elbow',
    'left_wrist', 'right_wrist',
    'left_hip', 'right_hip',
    'left_knee', 'right_knee',
    'left_ankle', 'right_ankle',
)

NUM_KEYPOINTS = len(KEYPOINT_NAMES)

INDEX = {name: i for i, name in enumerate(KEYPOINT_NAMES)}

# Index permutation that swaps every left joint with its right counterpart
FLIP_PERMUTATION = tuple(
    INDEX[name.replace('left_', 'right_')] if name.startswith('left_')
    else INDEX[name.replace('right_', 'left_')] if name.startswith('right_')
    else i
    for i, name in enumerate(KEYPOINT_NAMES)
)


def side(index):
    """+1 for left joints, -1 for right joints, 0 on the body midline."""
    name = KEYPOINT_NAMES[index]
    if name.startswith('left_'):
        return 1
    if name.startswith('right_'):
        return -1
    return 0
