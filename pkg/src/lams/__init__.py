"""LLM-driven automatic mode switching for low-DoF teleoperation, simulated.

Core pieces: the action-space algebra (actions), a deterministic kinematic
world (world, tasks), natural-language state grounding and prompt assembly
(grounding), logprob-based chat completion access (gateway), the switching
strategies and baselines (switching), the incremental example/rule learning
loop (learning), a scripted-user evaluation harness (harness), and an
interactive session service (service).
"""

from .actions import (
    ActionDirection,
    CanonicalLabel,
    DirectionGroup,
    ModeMapping,
    Pose6,
    RobotAction,
    UserAction,
    VelocityProfile,
    apply_mode,
    direction_of,
    group_of,
    label_of,
)
from .config import SessionClock, SimConfig
from .gateway import (
    BackendConfig,
    CompletionRequest,
    CompletionResult,
    GroupDistribution,
    extract_group_distributions,
)
from .grounding import PromptBundle, assemble_prompt, discretize_pose, relative_statements
from .learning import LearningStore, ManualSwitchEvent, Rule
from .switching import ModeSwitcher, StrategyKind, SwitchContext, select_direction
from .tasks import TaskSpec, build_task, task_progress
from .world import ObjectState, WorldState, detect_pause, step

__version__ = "0.1.0"

__all__ = [
    "ActionDirection", "CanonicalLabel", "DirectionGroup", "ModeMapping", "Pose6",
    "RobotAction", "UserAction", "VelocityProfile", "apply_mode", "direction_of",
    "group_of", "label_of", "SessionClock", "SimConfig", "BackendConfig",
    "CompletionRequest", "CompletionResult", "GroupDistribution",
    "extract_group_distributions", "PromptBundle", "assemble_prompt",
    "discretize_pose", "relative_statements", "LearningStore", "ManualSwitchEvent",
    "Rule", "ModeSwitcher", "StrategyKind", "SwitchContext", "select_direction",
    "TaskSpec", "build_task", "task_progress", "ObjectState", "WorldState",
    "detect_pause", "step",
]
