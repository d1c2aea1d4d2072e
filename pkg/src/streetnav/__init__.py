"""streetnav: a graph-based urban navigation simulator with verbalized
observations, pluggable action policies, navigation metrics, and a mixed
teacher/student training loop."""

from .angles import normalize_heading, signed_delta
from .env import (ACTIONS, Action, AgentState, Semantics, StepNote, StepOutcome,
                  step_modified, step_original)
from .episode import (DEFAULT_MAX_STEPS, EpisodeLog, ObservationBuilder, StepRecord,
                      load_episode, run_episode, store_episode)
from .fixtures import COMPARISON_TABLE, check_comparison_table
from .graph import (Edge, GoldActionSequence, GraphError, GraphLintWarning,
                    InstanceError, NavGraph, NavInstance, build_graph,
                    derive_gold_actions, load_graph, load_instances,
                    shortest_path_len, store_graph, store_instances)
from .landmarks import (DEFAULT_TAU, LandmarkSet, ScoreTable, Sighting,
                        build_extraction_prompt, load_raw_scores, load_stats,
                        parse_extraction_response, store_raw_scores, store_stats,
                        visible_sightings, z_score)
from .metrics import EvalResult, aggregate, evaluate_episode, kpa, spd, task_completion
from .policies import (Cassette, ConstantPolicy, EndpointConfig, EpisodeContext,
                       ExternalPolicy, LiteralScores, OraclePolicy, Policy,
                       PolicyError, ReferenceStep, ScriptedPolicy, ToyPolicy,
                       decode_action, external_lm_score, oracle_next_action,
                       oracle_plan)
from .synthetic import build_score_table, generate_synthetic
from .training import (Branch, EpochReport, TrainingConfig, TrainingReference,
                       evaluate_tc, forcing_step, store_training_report, train)
from .verbalize import (Observation, PromptParts, Templates, assemble_prompt,
                        extend_prompt, load_template_config, render_observation)

__version__ = "0.1.0"
