import numpy as np

# face model
NUM_JOINTS = 4
JOINT_NAMES = ("neck", "jaw", "left_eye", "right_eye")
# parent per joint; -1 is the global root
KINEMATIC_TREE = (-1, 0, 0, 0)
POSE_DIM = 3 * NUM_JOINTS + 3

REGIONS = ("other", "lips", "forehead", "cheeks", "nose", "eyes")
EVAL_REGIONS = ("lips", "cheeks", "eyes")

ASSET_MAGIC = b"FFNA"
ASSET_VERSION = 1
MIN_VERTICES = 12
WEIGHT_SUM_TOL = 1e-6

# synthetic head, template units are roughly meters
HEAD_RADII = (0.075, 0.1, 0.09)
SHAPE_BASIS_SCALE = 0.004
EXPRESSION_BASIS_SCALE = 0.006
EXPRESSION_FALLOFF = 0.022
DEFAULT_NUM_VERTICES = 1500
DEFAULT_NUM_BETA = 10
DEFAULT_NUM_PSI = 12

# sequences
ALLOWED_FRAME_COUNTS = (5, 10, 15, 20)
MAX_GLOBAL_ROTATION = 0.3
MAX_NECK_ROTATION = 0.2
MAX_JAW_ROTATION = 0.4
MAX_EYE_ROTATION = 0.0
MAX_PSI = 1.5
MAX_BETA = 2.0

# camera / rendering
DEFAULT_RESOLUTION = 512
DESK_RESOLUTION = 128
CAMERA_DISTANCE = 1.0
FOCAL_PER_HEIGHT = 2.9
NEAR_CLIP = 0.05
FAR_CLIP = 1.9
BACKGROUND_DEPTH = 2.0
LIGHT_DIRECTION = (0.3, -0.4, 1.0)
AMBIENT = 0.35
BACKGROUND_COLOR = (96, 104, 120)
SKIN_COLOR = (224, 172, 150)
LIPS_COLOR = (190, 96, 100)
EYES_COLOR = (70, 60, 60)
# triangles rasterized per vectorized batch
RASTER_CHUNK = 256
BARYCENTRIC_TOL = 1e-6

# flow
OCCLUSION_FRACTION = 1e-3
FLO_MAGIC = np.float32(202021.25)
UNKNOWN_FLOW = 1e10
UNKNOWN_FLOW_THRESH = 1e9

# decomposition
HUBER_SCALE = 1.0
TUKEY_C = 4.685
IRLS_MAX_ITERATIONS = 100
IRLS_TOLERANCE = 1e-12
MIN_ROBUST_SIGMA = 1e-3
INLIER_FACTOR = 3.0

# dataset
SPLIT_RATIOS = (97, 2, 1)
SPLIT_TAGS = ("train", "test", "val")
MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
ASSET_NAME = "asset.ffna"
REPORT_NAME = "eval_report.json"
WORKERS_ENV = "FACEFLOW_WORKERS"
DEPTH_MASK_EPS = 1e-4

# colorwheel segment lengths: red-yellow, yellow-green, green-cyan,
# cyan-blue, blue-magenta, magenta-red
COLORWHEEL_SEGMENTS = (15, 6, 4, 11, 13, 6)
