"""Skill-balancing shooter NPC: a SARSA(lambda) learner whose training snapshots
form a catalogue that a kill-death balancer steps through at play time."""
from .arena import (PROFILES, ArenaConfig, GameLog, Incident, OpponentProfile, World, duel,
                    run_game, scripted_learner)
from .catalogue import Balancer, Catalogue, CatalogueBuilder, Milestone, load_milestone, maybe_capture
from .experiments import ExperimentConfig, evaluate, train
from .persistence import load_catalogue, read_qtable, save_catalogue, write_qtable
from .rl import (ACTIONS, ActionId, Discretizer, LearnerConfig, QTable, SarsaLambdaLearner, StateKey,
                 discretize, reset_traces, reward_for_shot, sarsa_lambda_update, select_action)

__all__ = [
    "ACTIONS", "ActionId", "ArenaConfig", "Balancer", "Catalogue", "CatalogueBuilder", "Discretizer",
    "ExperimentConfig", "GameLog", "Incident", "LearnerConfig", "Milestone", "OpponentProfile",
    "PROFILES", "QTable", "SarsaLambdaLearner", "StateKey", "World", "discretize", "duel", "evaluate",
    "load_catalogue", "load_milestone", "maybe_capture", "read_qtable", "reset_traces",
    "reward_for_shot", "run_game", "sarsa_lambda_update", "save_catalogue", "scripted_learner",
    "select_action", "train", "write_qtable",
]
