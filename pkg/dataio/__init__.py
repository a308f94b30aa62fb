from .kitti import (
    Frame,
    ImageRaster,
    KittiFormatError,
    PointCloud,
    SequenceBundle,
    load_sequence,
    read_calib,
    read_image_raster,
    read_point_bin,
    read_poses,
    write_sequence,
    write_trajectory,
)
from .synth import SceneConfig, generate_sequence
