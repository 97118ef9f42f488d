"""
Константы проекта Trajectory Attack Bench
Централизованное хранение всех магических чисел и строк
"""

import math

# === Версия приложения ===
APP_VERSION = "1.0"
APP_NAME = "Trajectory Attack Bench"

# === Константы логирования ===
DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_LOG_FILE = "trajectory_bench.log"
DEFAULT_LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

# === Константы конфигурации ===
DEFAULT_CONFIG_FILE = "config.json"
DEFAULT_OUTPUT_DIR = "./runs"
ENV_PREFIX = "ADVDO_"

# === Форматы файлов ===
SCENARIO_FORMAT = "trajbench-scenario/1"
MAP_FORMAT = "trajbench-map/1"
REPORT_FORMAT = "trajbench-report/1"
MODEL_FORMAT = "trajbench-model/1"

# === Сцена и дискретизация (2 Гц, H=4, T=12) ===
DEFAULT_DT = 0.5
DEFAULT_HISTORY_LEN = 4
DEFAULT_FUTURE_LEN = 12
DEFAULT_UPSAMPLE_FACTOR = 5

# === Динамика ===
SPEED_EPS = 0.05  # м/с, ниже кривизна ненаблюдаема
DEFAULT_ACCEL_BOUND = 10.0
DEFAULT_SPEED_MAX = 40.0
DEFAULT_CURVATURE_BOUND = 0.3
DEFAULT_HEADING_RATE_BOUND = 1.0
BOUND_TOLERANCE = 1e-9

# === Атака ===
DEFAULT_ALPHA = 0.3
DEFAULT_BETA = 0.1
DEFAULT_GAMMA = 1.0
DEFAULT_EPS = 1.0
DEFAULT_PGD_STEPS = 30
DEFAULT_PGD_STEP_SCALE = 0.5
MAX_FEASIBILITY_HALVINGS = 8
# возврат начальной D_adv в ε-шар
RESTORE_STEPS = 100
RESTORE_LR = 0.05
RESTORE_MARGIN = 0.9

# === Реконструкция ===
DEFAULT_RECON_STEPS = 5
DEFAULT_RECON_LR = 0.05
DEFAULT_RECON_DYN_WEIGHT = 1e-3
MAX_LR_HALVINGS = 5

# === Предикторы ===
FINITE_DIFF_STEP = 1e-4
SOCIAL_NEIGHBORS = 4
DEFAULT_SOCIAL_MODES = 3
DEFAULT_BRIDGE_TIMEOUT = 30.0

# === Метрики ===
DEFAULT_MISS_THRESHOLD = 2.0
DEFAULT_SENSITIVITY_RADIUS = 5.0
INTERACTION_COST_WEIGHT = 1.0
INTERACTION_COST_LENGTH = 2.0

# === Планирование и симуляция ===
DEFAULT_FOOTPRINT = (4.0, 1.8)
DEFAULT_PLAN_HORIZON = 6.0
DEFAULT_REPLAN_INTERVAL = 0.5
LATTICE_OFFSETS = (0.0, -0.75, 0.75, -1.5, 1.5, -2.25, 2.25)
LATTICE_LOOKAHEAD = 20.0
MPC_HORIZON_STEPS = 12
MPC_DT = 0.5
MPC_SWEEPS = 2
MPC_POSITION_WEIGHT = 1.0
MPC_SPEED_WEIGHT = 0.1
MPC_ACCEL_WEIGHT = 0.05
MPC_CURVATURE_WEIGHT = 1.0
MPC_DAMPING = 1e-6
LATTICE_OFFROAD_COST = 100.0
LATTICE_OFFSET_WEIGHT = 1.0
LATTICE_EFFORT_WEIGHT = 0.5
LATTICE_INTERACTION_WEIGHT = 1.0
LATTICE_SAFETY_MARGIN = (1.0, 0.4)  # прибавка к длине и ширине эго при отборе кандидатов
RULE_TTC_THRESHOLD = 3.0
RULE_COMFORT_DECEL = 3.0
PLAN_DT = 0.1
RULE_MIN_LOOKAHEAD = 5.0
STOP_MARGIN = 1.0

TWO_PI = 2.0 * math.pi
