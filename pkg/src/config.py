import math
from pathlib import Path

# Lidar sensor model (270 deg FOV, 0.25 deg resolution, 30 m range).
LIDAR_FOV = 1.5 * math.pi
LIDAR_BEAMS = 1080
LIDAR_MAX_RANGE = 30.0
DOWNSAMPLE_WINDOW = 36
SCAN_CHANNELS = LIDAR_BEAMS // DOWNSAMPLE_WINDOW

STATE_DIM = SCAN_CHANNELS + 4
ACTION_DIM = 2
GOAL_DISTANCE_LIMIT = 12.0

# Episode defaults (5 Hz control, Turtlebot2-class limits).
CONTROL_DT = 0.2
MAX_EPISODE_STEPS = 400
GOAL_TOLERANCE = 0.3
V_MAX = 0.5
OMEGA_MAX = 1.0
ROBOT_RADIUS = 0.2
GOAL_WINDOW = 8.0
ARC_OMEGA_EPS = 1e-6

PID_GAIN_V = 1.0
PID_GAIN_OMEGA = 2.0

# Geometry kernel.
PARALLEL_EPS = 1e-12
SAMPLING_ATTEMPTS = 10_000
RAY_CHUNK = 4096

# Scenario augmentation.
AUGMENT_PROBABILITY = 0.5
AUGMENT_UPPER_BOUND = 4.0

# Rewards and score.
REWARD_KIND = "sparse"
R_REACH = 1.0
R_CRASH = -1.0
DENSE_C1 = 0.1

# Networks and optimizer.
HIDDEN_SIZES = (256, 256, 256)
HIDDEN_ACTIVATION = "relu"
DROPOUT_RATE = 0.0
LEARNING_RATE = 3e-4
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# Delayed SAC.
SAC_ALPHA = 0.2
SAC_GAMMA = 0.99
SAC_TAU = 0.005
BATCH_SIZE = 256
BUFFER_CAPACITY = 200_000
LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
TANH_EPS = 1e-6
WARMUP_EPISODES = 100
POLICY_DELAY = 2

# Run orchestration.
TOTAL_STEPS = 200_000
EVAL_INTERVAL = 2_000
DEFAULT_SEED = 0
RNG_STREAMS = ("world", "policy", "replay", "init")

# Verification.
GRADCHECK_SAMPLES = 100
GRADCHECK_STEP = 1e-5
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_ABS_FLOOR = 1e-8
EQUIVARIANCE_RAYS = 1_000
EQUIVARIANCE_FACTORS = (1.5, 2.0, 4.0)
EQUIVARIANCE_TOLERANCE = 1e-9

PROJECT_DIR = Path(__file__).resolve().parents[1]
SCENARIO_DIR = PROJECT_DIR / "scenarios"
TASK_DIR = PROJECT_DIR / "tasks"
SCENARIO_FILES = {
    "env1": SCENARIO_DIR / "env1.yaml",
    "env2": SCENARIO_DIR / "env2.yaml",
    "env3": SCENARIO_DIR / "env3.yaml",
    "env4": SCENARIO_DIR / "env4.yaml",
    "env1_x2": SCENARIO_DIR / "env1_x2.yaml",
}
DEFAULT_TASK_SUITE = TASK_DIR / "eval_suite.yaml"
DEFAULT_OUT_DIR = Path("runs")

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_DIR_NAME = "checkpoints"
EVAL_DIR_NAME = "eval"
METRIC_LOG_NAME = "metrics.csv"
EVAL_LOG_NAME = "evals.csv"
METRIC_LOG_COLUMNS = [
    "step",
    "episode",
    "rho",
    "return",
    "episode_length",
    "terminal_kind",
    "critic_updates",
    "policy_updates",
    "q_loss",
    "value_loss",
    "policy_loss",
    "eval_score",
]
TRAJECTORY_COLUMNS = ["t", "x", "y", "theta", "v", "omega", "d_g"]
